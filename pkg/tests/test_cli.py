import io
import json
from pathlib import Path

import pytest

from jetcalc import connection, frobenius, phg
from jetcalc.cli import run
from jetcalc.problemfile import (
    DuplicateDefinition,
    MissingCoefficient,
    ParseError,
    UnknownCoordinate,
    load,
    loads,
)
from jetcalc.symexpr import parse

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def jetc(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def report(*argv):
    code, out, _ = jetc(*argv, "--json")
    data = json.loads(out)
    assert data["schema"] == 1 and data["exit_code"] == code
    return code, data["result"]


def normalized(d):
    return json.loads(json.dumps(d))


# -- loader -----------------------------------------------------------------


def test_load_e1():
    prob = load(CORPUS / "e1.jet")
    assert prob.kind == "connection"
    assert (prob.space.n, prob.space.m, prob.space.order) == (2, 1, 0)
    assert prob.points["P"] == {"x1": 0.0, "x2": 0.0, "y": 1.0}
    assert prob.boxes["B"] == ((0.0, 1.0), (0.0, 1.0))
    assert prob.name == "e1"


def test_missing_coefficient():
    with pytest.raises(MissingCoefficient, match=r"c\[y;;2\]"):
        loads("base 2 x1 x2\nfiber 1 y\norder 0\nc[y;;1] = y\n")


def test_kind_conflict():
    text = "base 2 x1 x2\nfiber 1 y\norder 1\nc[y;;1] = y\nf[y;1] = y\n"
    with pytest.raises(DuplicateDefinition) as info:
        loads(text)
    assert info.value.line == 5


def test_duplicate_coefficient():
    text = "base 1 x1\nfiber 1 y\norder 0\nc[y;;1] = y\nc[y;;1] = 2*y\n"
    with pytest.raises(DuplicateDefinition):
        loads(text)


def test_unknown_coordinate_has_position():
    text = "base 1 x1\nfiber 1 y\norder 0\nc[y;;1] = z*y\n"
    with pytest.raises(UnknownCoordinate) as info:
        loads(text)
    assert (info.value.line, info.value.column) == (4, 11)


def test_pde_rhs_must_stay_below_top_order():
    text = "base 1 x1\nfiber 1 y\norder 1\nf[y;1] = y_1\n"
    with pytest.raises(UnknownCoordinate):
        loads(text)


def test_syntax_error_position():
    with pytest.raises(ParseError) as info:
        loads("base 1 x1\nfiber 1 y\norder 0\nc[y;;1] = y +\n")
    assert info.value.line == 4


def test_comments_and_blank_lines():
    prob = loads("# header\n\nbase 1 x1   # the base\nfiber 1 y\norder 0\nc[y;;1] = 3  # const\n")
    assert str(prob.connection.coefficient(1, (), 1)) == "3"


def test_geometric_and_pde_files():
    g = load(CORPUS / "oscillator.jet")
    assert g.kind == "geometric" and connection.is_geometric(g.connection).geometric
    p = load(CORPUS / "pde_e2.jet")
    assert p.kind == "pde" and p.epsilon is not None
    assert p.points["Z"] == {"x1": 0.5, "x2": 0.0, "y": 0.0}


# -- commands -------------------------------------------------------------


def test_flat_command():
    code, out, _ = jetc("flat", CORPUS / "e1.jet")
    assert code == 0 and out.splitlines()[0] == "FLAT (symbolic)"
    code, out, _ = jetc("flat", CORPUS / "e2.jet")
    assert code == 1 and out.splitlines()[0] == "NOT FLAT"


def test_curvature_command():
    code, out, _ = jetc("curvature", CORPUS / "e2.jet", "--symbolic")
    assert code == 0
    assert out.splitlines()[0] == "R[y;;(1,2)] = -(y)"


def test_solve_command(tmp_path):
    target = tmp_path / "t.csv"
    code, out, _ = jetc("solve", CORPUS / "e1.jet", "--init", "0,0,1", "--box", "0:1,0:1", "--step", "0.01",
                        "--out", target)
    assert code == 0
    assert target.read_text().startswith("x1,x2,y\n")
    assert "max|y - (exp(x1 + x2))|" in out


def test_errors_exit_two(tmp_path):
    assert jetc("flat", tmp_path / "missing.jet")[0] == 2
    bad = tmp_path / "bad.jet"
    bad.write_text("base 2 x1 x2\nfiber 1 y\norder 0\nc[y;;1] = y\n")
    code, _, err = jetc("flat", bad)
    assert code == 2 and "c[y;;2]" in err
    assert jetc("solve", CORPUS / "e1.jet", "--init", "0,0,1", "--step", "0.1")[0] == 2
    assert jetc("eps-check", CORPUS / "e1.jet")[0] == 2
    assert jetc("nonsense", CORPUS / "e1.jet")[0] == 2


@pytest.mark.parametrize("name,expected", [
    ("e1", 0), ("e2", 1), ("e3", 0), ("const", 0), ("expsum", 0), ("pde_e2", 1),
])
def test_flat_exit_codes(name, expected):
    assert jetc("flat", CORPUS / f"{name}.jet")[0] == expected


# -- thin adapters: JSON equals the direct call ------------------------------


def test_json_curvature_and_flat():
    conn = load(CORPUS / "e2.jet").connection
    _, res = report("curvature", CORPUS / "e2.jet")
    assert res["components"] == connection.curvature(conn).to_dict()
    _, res = report("flat", CORPUS / "e2.jet")
    assert res == normalized(connection.is_flat(conn).to_dict())


def test_json_geometric():
    conn = load(CORPUS / "drift.jet").connection
    code, res = report("geometric", CORPUS / "drift.jet")
    assert code == 1 and res == connection.is_geometric(conn).to_dict()


def test_json_prolong():
    conn = load(CORPUS / "e2.jet").connection
    _, res = report("prolong", CORPUS / "e2.jet")
    assert res == phg.prolong_equations(conn).to_dict()


def test_json_surjective_at():
    conn = load(CORPUS / "e2.jet").connection
    for point, code_expected in (("P", 1), ("Z", 0)):
        p = load(CORPUS / "e2.jet").points[point]
        code, res = report("surjective-at", CORPUS / "e2.jet", "--point", point)
        assert code == code_expected
        assert res["surjective"] == phg.prolongation_surjective_at(conn, p)
        assert res["curvature_at_p"] == connection.curvature(conn).evaluate_at(p)
        assert res["preimage_search"]["preimage_exists"] == phg.prolongation_preimage_exists(conn, p)


def test_json_solve():
    prob = load(CORPUS / "e1.jet")
    _, res = report("solve", CORPUS / "e1.jet", "--point", "P", "--box", "B", "--step", "0.05")
    trace = frobenius.integrate(prob.connection, prob.points["P"], frobenius.GridBox((0, 0), (1, 1), 0.05))
    assert res["max_error"]["y"] == frobenius.max_error(trace, "y", parse("exp(x1 + x2)"))


def test_json_solve_geometric():
    prob = load(CORPUS / "oscillator.jet")
    _, res = report("solve", CORPUS / "oscillator.jet", "--point", "P", "--box", "0:1", "--step", "0.01")
    sol = frobenius.solve_geometric(prob.connection, prob.points["P"], frobenius.GridBox((0,), (1,), 0.01))
    for key, value in sol.to_dict().items():
        assert res[key] == value


def test_json_paths():
    conn = load(CORPUS / "e2.jet").connection
    _, res = report("paths", CORPUS / "e2.jet", "--init", "0,0,1", "--corner", "1,1", "--step", "0.05")
    assert res["discrepancy"] == frobenius.path_dependence(conn, (0, 0, 1), (1, 1), 0.05)
    assert res["signed_holonomy_12"] == list(frobenius.signed_holonomy(conn, (0, 0, 1), (1, 1), 0.05))
    assert res["signed_holonomy_12"][0] < 0


def test_json_eps_check():
    for name, code_expected in (("pde_e1", 0), ("pde_e2", 1), ("pde_bad", 1), ("pde_ode", 0)):
        eps = load(CORPUS / f"{name}.jet").epsilon
        code, res = report("eps-check", CORPUS / f"{name}.jet")
        assert code == code_expected
        assert res == normalized(phg.epsilon_is_connection(eps).to_dict())


def test_json_phg_curvature():
    eps = load(CORPUS / "pde_e2.jet").epsilon
    _, res = report("phg-curvature", CORPUS / "pde_e2.jet")
    curv = phg.phg_curvature(eps)
    assert res["components"] == curv.to_dict()
    assert res["rank"] == curv.rank
    assert res["vanishes"] is False


def test_json_exactness_at():
    prob = load(CORPUS / "pde_e2.jet")
    for point, code_expected in (("P", 1), ("Z", 0)):
        code, res = report("exactness-at", CORPUS / "pde_e2.jet", "--point", point)
        assert code == code_expected
        assert res == normalized(phg.exactness_check_at(prob.epsilon, prob.points[point]).to_dict())
