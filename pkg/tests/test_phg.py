import numpy as np
import pytest

from jetcalc.connection import Connection, GeometricSpec, curvature, is_flat, make_geometric
from jetcalc.jetcore import JetSpace, multi_indices
from jetcalc.phg import (
    EpsilonSection,
    NotGeometric,
    SolvedPde,
    canonical_epsilon,
    epsilon_is_connection,
    exactness_check_at,
    graph_preimage_search,
    phg_curvature,
    prolong_equations,
    prolongation_preimage_exists,
    prolongation_surjective_at,
    reduce_to_first_order,
    restricted_total_derivative,
)
from jetcalc.symexpr import Const, Var, ZeroKind, equivalent, evaluate, parse, simplify
from oracles import random_connection, random_flat_first_order, random_geometric, random_point

J0 = JetSpace.standard(2, 1, 0)
J1 = JetSpace.standard(2, 1, 1)


def e1():
    return Connection(J0, {(1, (), 1): "y", (1, (), 2): "y"})


def e2():
    return Connection(J0, {(1, (), 1): "y", (1, (), 2): "x1*y"})


def pde(space, f):
    return SolvedPde(space, {key: parse(v, frozenset(space.with_order(space.order - 1).coordinates))
                             for key, v in f.items()})


E1_PDE = {(1, (1,)): "y", (1, (2,)): "y"}
E2_PDE = {(1, (1,)): "y", (1, (2,)): "x1*y"}


# -- prolongation of connections -------------------------------------------


def test_prolong_constant_coefficients():
    conn = Connection(J0, {(1, (), 1): 2, (1, (), 2): -1})
    system = prolong_equations(conn)
    assert system.first[(1, 1)] == simplify(parse("y_1 - 2"))
    assert all(e == Var(system.space.jet_name(1, (j, k))) for (a, j, k), e in system.second.items())


def test_prolong_e1_is_consistent():
    system = prolong_equations(e1())
    values = {(j, k): v for (_, j, k), v in system.candidates.items()}
    assert all(v == Var("y") for v in values.values())


def test_prolong_e2_candidates_differ_by_curvature():
    system = prolong_equations(e2())
    # candidates[(a, j, k)] is Dc_k c_j
    gap = simplify(system.candidates[(1, 1, 2)] - system.candidates[(1, 2, 1)])
    r12 = curvature(e2()).component(1, (), 1, 2)
    assert equivalent(gap, r12).is_zero


def test_surjective_at_examples():
    assert prolongation_surjective_at(e1(), {"x1": 0.3, "x2": -1.0, "y": 4.0})
    assert not prolongation_surjective_at(e2(), {"x1": 0.0, "x2": 0.0, "y": 1.0})
    assert prolongation_surjective_at(e2(), {"x1": 0.7, "x2": 0.2, "y": 0.0})
    const = Connection(J0, {(1, (), 1): 3, (1, (), 2): 5})
    assert prolongation_surjective_at(const, {"x1": 9.0, "x2": 9.0, "y": 9.0})


@pytest.mark.parametrize("seed", range(6))
def test_surjectivity_agrees_with_direct_preimage_search(seed):
    rng = np.random.default_rng(100 + seed)
    homogeneous = seed % 2 == 0
    conn = random_connection(rng, 2, 2, homogeneous) if seed < 3 else random_geometric(rng, 2, 1, homogeneous)
    fiber = [conn.space.jet_name(a, mu) for a, mu in conn.space.fiber_coordinates]
    for i in range(10):
        p = random_point(rng, conn.space.coordinates, zero=fiber if homogeneous and i % 2 else ())
        assert prolongation_surjective_at(conn, p) == prolongation_preimage_exists(conn, p)


def test_preimage_search_refuses_non_geometric():
    space = JetSpace.standard(1, 1, 1)
    conn = Connection(space, {(1, (), 1): "y_1 + 1", (1, (1,), 1): "0"})
    with pytest.raises(NotGeometric):
        prolongation_preimage_exists(conn, {"x1": 0.0, "y": 0.0, "y_1": 0.0})


def test_preimage_search_reports_conflicts():
    given = {(1, (1,)): parse("y"), (1, (2,)): parse("x1*y")}
    res = graph_preimage_search(J0, given, {"x1": 0.0, "x2": 0.0, "y": 1.0})
    assert not res.exists
    assert res.conflicts[0]["coordinate"] == "y_12"


# -- reduction -----------------------------------------------------------------


def test_reduce_second_order_ode():
    space = JetSpace.standard(1, 1, 2)
    conn = reduce_to_first_order(pde(space, {(1, (1, 1)): "0"}))
    assert conn.space.fiber == ("y", "y_1")
    assert conn.coefficient(1, (), 1) == Var("y_1")
    assert conn.coefficient(2, (), 1) == Const(0)


def test_reduce_identifies_first_order_systems():
    red = reduce_to_first_order(pde(J1, E1_PDE))
    ref = e1()
    assert red.space.coordinates == ref.space.coordinates
    assert red.coefficients == ref.coefficients


def test_reduced_curvature_of_e2():
    red = reduce_to_first_order(pde(J1, E2_PDE))
    assert str(curvature(red).component(1, (), 1, 2)) == "-(y)"


def test_restricted_total_derivative():
    p = pde(JetSpace.standard(1, 1, 1), {(1, (1,)): "x1*y"})
    assert equivalent(restricted_total_derivative(p, parse("x1*y"), 1), parse("y + x1^2*y")).is_zero


def test_solved_pde_validates():
    with pytest.raises(ValueError):
        SolvedPde(J1, {(1, (1,)): parse("y")})
    with pytest.raises(ValueError):
        SolvedPde(J1, {(1, (1,)): parse("y_1"), (1, (2,)): parse("y")})
    with pytest.raises(ValueError):
        SolvedPde(J0, {})


# -- epsilon sections ------------------------------------------------------------


def test_canonical_epsilon_is_a_connection():
    space = JetSpace.standard(1, 1, 1)
    f = pde(space, {(1, (1,)): "sin(x1)*y + y^2"})
    report = epsilon_is_connection(canonical_epsilon(f))
    assert report.is_connection
    manual = EpsilonSection(f, {(1, (1, 1)): parse("cos(x1)*y + (sin(x1) + 2*y)*(sin(x1)*y + y^2)")})
    assert epsilon_is_connection(manual).is_connection


def test_wrong_epsilon_defect_is_minus_one():
    space = JetSpace.standard(1, 1, 1)
    eps = EpsilonSection(pde(space, {(1, (1,)): "x1"}), {(1, (1, 1)): parse("0")})
    report = epsilon_is_connection(eps)
    assert not report.is_connection
    assert report.defects == {"E[y;1;1]": Const(-1)}


def test_no_epsilon_for_e2():
    f = pde(J1, E2_PDE)
    rng = np.random.default_rng(0)
    candidates = [canonical_epsilon(f)]
    for _ in range(5):
        g = {(1, s): parse(f"{rng.integers(-3, 4)}*y + {rng.integers(-3, 4)}*x1*y") for s in multi_indices(2, 2)}
        candidates.append(EpsilonSection(f, g))
    for eps in candidates:
        assert not epsilon_is_connection(eps).is_connection


def test_epsilon_verdict_matches_connection_defect():
    rng = np.random.default_rng(3)
    for i in range(6):
        f = random_flat_first_order(rng, 2)
        eps = canonical_epsilon(f)
        if i % 2:
            g = dict(eps.g)
            g[(1, (1, 2))] = simplify(g[(1, (1, 2))] + Var("x1"))
            eps = EpsilonSection(f, g)
        curv = phg_curvature(eps)
        zero = all(
            v.is_zero for k, v in curv.verdicts().items() if k.startswith("C[")
        )
        assert epsilon_is_connection(eps).is_connection == zero


def test_epsilon_section_validates():
    f = pde(JetSpace.standard(1, 1, 1), {(1, (1,)): "y"})
    with pytest.raises(ValueError):
        EpsilonSection(f, {})
    with pytest.raises(ValueError):
        EpsilonSection(f, {(1, (1, 1)): parse("y_1")})


# -- phg curvature and exactness ---------------------------------------------


def test_phg_curvature_e1_canonical_vanishes_symbolically():
    eps = EpsilonSection(pde(J1, E1_PDE), {(1, s): parse("y") for s in multi_indices(2, 2)})
    curv = phg_curvature(eps)
    assert all(e == Const(0) for _, e in curv.labelled())
    assert curv.rank == len(curv.labelled())


def test_phg_curvature_e2_frobenius_defect():
    curv = phg_curvature(canonical_epsilon(pde(J1, E2_PDE)))
    assert str(curv.frobenius_defect.component(1, (), 1, 2)) == "-(y)"
    assert any(v.kind is ZeroKind.NONZERO for v in curv.verdicts().values())


def test_zero_system_is_exact_everywhere():
    space = JetSpace.standard(2, 1, 2)
    f = pde(space, {(1, s): "0" for s in multi_indices(2, 2)})
    eps = EpsilonSection(f, {(1, s): Const(0) for s in multi_indices(2, 3)})
    assert all(e == Const(0) for _, e in phg_curvature(eps).labelled())
    res = exactness_check_at(eps, {c: 0.3 for c in f.lower.coordinates})
    assert res.preimage_exists and res.max_abs_r == 0.0


def test_exactness_examples():
    eps1 = EpsilonSection(pde(J1, E1_PDE), {(1, s): parse("y") for s in multi_indices(2, 2)})
    res = exactness_check_at(eps1, {"x1": 0.1, "x2": 0.2, "y": 1.3})
    assert res.preimage_exists and res.max_abs_r < 1e-12 and res.consistent
    eps2 = canonical_epsilon(pde(J1, E2_PDE))
    res = exactness_check_at(eps2, {"x1": 0.5, "x2": 0.0, "y": 1.0})
    assert not res.preimage_exists and res.consistent
    assert res.r_at_p["F[y;;(1,2)]"] == -1.0


def test_prolongation_family_is_needed():
    # f = 0 with g_22 = x1: connection and Frobenius defects vanish at x1 = 0,
    # but the third derivatives there disagree (D_1 g_22 = 1, D_2 g_12 = 0)
    f = pde(J1, {(1, (1,)): "0", (1, (2,)): "0"})
    eps = EpsilonSection(f, {(1, (1, 1)): Const(0), (1, (1, 2)): Const(0), (1, (2, 2)): Var("x1")})
    res = exactness_check_at(eps, {"x1": 0.0, "x2": 0.4, "y": 2.0})
    assert not res.preimage_exists
    assert res.consistent
    assert res.r_at_p["P[y;122;(22,1)|(12,2)]"] == 1.0


@pytest.mark.parametrize("seed", range(4))
def test_exactness_consistency_on_random_flat_systems(seed):
    rng = np.random.default_rng(seed)
    f = random_flat_first_order(rng, 2)
    eps = canonical_epsilon(f)
    assert is_flat(reduce_to_first_order(f)).flat
    curv = phg_curvature(eps)
    for _ in range(10):
        p = random_point(rng, f.lower.coordinates, scale=1.0)
        res = exactness_check_at(eps, p, curv=curv)
        assert res.consistent and res.preimage_exists


def test_geometric_random_flat_detected():
    space = JetSpace.standard(2, 1, 1)
    conn = make_geometric(GeometricSpec(space, {(1, (1, 1)): "y_1", (1, (1, 2)): "0", (1, (2, 2)): "y_2"}))
    p = {"x1": 0.2, "x2": 0.1, "y": 1.0, "y_1": -1.0, "y_2": 0.5}
    assert prolongation_surjective_at(conn, p) and prolongation_preimage_exists(conn, p)
    assert evaluate(curvature(conn).component(1, (1,), 1, 2), p) == 0.0
