"""Prehomogeneous geometries: prolongation, epsilon-extensions, phg curvature.

Everything here works with PDEs that are graphs over a space of lower jets:
a connection ``c`` on ``E`` (graph over ``E``), a geometric connection on
``J^k`` (graph over ``J^k``), or a solved-form ``H^k`` extended by an
epsilon-section (graph over ``J^(k-1)``).  Surjectivity of the prolongation
map for such a graph can be decided pointwise by formally differentiating the
given coordinates and checking that every order-raising step lands on a
single, symmetric value.  :func:`graph_preimage_search` does exactly that with
numbers only, so it can serve as an oracle for the symbolic curvatures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .connection import (
    Connection,
    Curvature,
    connection_total_derivative,
    curvature,
    is_geometric,
)
from .jetcore import JetSpace, add_index, decompositions, mu_text, multi_indices
from .symexpr import (
    Const,
    Expr,
    Neg,
    Sub,
    Var,
    diff,
    evaluate_many,
    is_zero,
    parse,
    simplify,
)
from .symexpr.zero import DEFAULT_SAMPLES, DEFAULT_TOL


class NotGeometric(ValueError):
    pass


# -- prolongation of connections -------------------------------------------


@dataclass(frozen=True)
class ProlongationSystem:
    """Defining equations of ``rho(c(E))`` on ``J^2(E)``, each of the form ``lhs = 0``.

    ``first[(a, j)]`` is ``y^a_j - c^a_j``; ``second[(a, j, k)]`` is
    ``y^a_jk - Dc_k c^a_j`` for every ordered pair ``(j, k)``, so the two
    equations for one symmetric coordinate may disagree.
    """

    space: JetSpace
    first: dict
    second: dict
    candidates: dict = field(repr=False)

    def equations(self) -> list[tuple[str, Expr]]:
        out = []
        for (a, j), e in self.first.items():
            out.append((f"{self.space.jet_name(a, (j,))} - c[{self.space.fiber[a - 1]};;{j}]", e))
        for (a, j, k), e in self.second.items():
            out.append((f"{self.space.jet_name(a, add_index((j,), k))} [from ({j},{k})]", e))
        return out

    def to_dict(self):
        return {lbl: str(e) for lbl, e in self.equations()}


def prolong_equations(conn: Connection) -> ProlongationSystem:
    if conn.order != 0:
        raise ValueError("prolong_equations expects a connection on E (k = 0)")
    space2 = conn.space.with_order(2)
    n, m = conn.space.n, conn.space.m
    first, second, candidates = {}, {}, {}
    for a in range(1, m + 1):
        for j in range(1, n + 1):
            c_j = conn.coefficient(a, (), j)
            first[(a, j)] = simplify(Sub(Var(space2.jet_name(a, (j,))), c_j))
            for k in range(1, n + 1):
                value = connection_total_derivative(conn, c_j, k)
                candidates[(a, j, k)] = value
                second[(a, j, k)] = simplify(Sub(Var(space2.jet_name(a, add_index((j,), k))), value))
    return ProlongationSystem(space2, first, second, candidates)


def prolongation_surjective_at(conn: Connection, p, tol: float = DEFAULT_TOL, curv: Curvature | None = None) -> bool:
    """Whether ``rho(c(J^k)) -> c(J^k)`` hits the point over ``p``: all ``|R(p)| < tol``."""
    curv = curv or curvature(conn)
    values = curv.evaluate_at(p)
    return all(abs(v) < tol for v in values.values())


def geometric_top(conn: Connection) -> dict:
    space = conn.space
    return {
        (a, sigma): conn.coefficient(a, sigma[:-1], sigma[-1])
        for a in range(1, space.m + 1)
        for sigma in multi_indices(space.n, space.order + 1)
    }


def prolongation_preimage_exists(conn: Connection, p, tol: float = DEFAULT_TOL, report=None) -> bool:
    """Direct search for a point of ``rho(c(J^k))`` over ``c(p)``.

    Valid for connections on ``E`` and geometric connections on ``J^k``;
    independent of :func:`curvature`.
    """
    report = report if report is not None else is_geometric(conn)
    if not report.geometric:
        raise NotGeometric("c(J^k) is not a submanifold of J^(k+1) for a non-geometric connection")
    return graph_preimage_search(conn.space, geometric_top(conn), p, tol).exists


# -- the numeric oracle ------------------------------------------------------


@dataclass(frozen=True)
class PreimageSearch:
    exists: bool
    conflicts: list

    def to_dict(self):
        return {"preimage_exists": self.exists, "conflicts": list(self.conflicts)}


def graph_preimage_search(params: JetSpace, given: dict, point, tol: float = DEFAULT_TOL) -> PreimageSearch:
    """Does the prolongation of a graph-type PDE have a point over ``point``?

    ``params`` is the jet space whose coordinates parametrize the PDE (order
    ``p``); ``given`` maps ``(alpha, sigma)`` with ``p < |sigma| <= q`` to
    expressions in those parameters.  Every given coordinate is formally
    differentiated numerically (partials evaluated at ``point`` and assembled
    by the chain rule).  A preimage exists iff each derivative of an order
    ``< q`` coordinate equals the given value of the next one, and the
    derivatives of order-``q`` coordinates agree for every pair of
    decompositions of the same order-``(q+1)`` index.
    """
    p = params.order
    q = max(len(s) for _, s in given)
    point = {c: float(point[c]) for c in params.coordinates}
    keys = list(given)
    given_values = dict(zip(keys, evaluate_many([given[k] for k in keys], point)))

    def value(alpha, sigma):
        if len(sigma) <= p:
            return point[params.jet_name(alpha, sigma)]
        return given_values[(alpha, sigma)]

    conflicts = []
    top_candidates: dict = {}
    for (alpha, sigma), e in given.items():
        free = e.free_vars
        partial_names = [c for c in params.coordinates if c in free]
        partials = dict(zip(partial_names, evaluate_many([diff(e, c) for c in partial_names], point)))
        for j in range(1, params.n + 1):
            d = partials.get(params.base_name(j), 0.0)
            for beta, tau in params.fiber_coordinates:
                name = params.jet_name(beta, tau)
                if name in partials:
                    d += partials[name] * value(beta, add_index(tau, j))
            target = add_index(sigma, j)
            if len(target) <= q:
                ref = value(alpha, target)
                if abs(d - ref) >= tol:
                    conflicts.append(
                        {"coordinate": params.jet_name(alpha, target), "from": [mu_text(sigma), j],
                         "derived": d, "given": ref}
                    )
            else:
                top_candidates.setdefault((alpha, target), []).append((sigma, j, d))
    for (alpha, target), cands in top_candidates.items():
        for (s1, j1, d1), (s2, j2, d2) in combinations(cands, 2):
            if abs(d1 - d2) >= tol:
                conflicts.append(
                    {"coordinate": params.jet_name(alpha, target),
                     "from": [[mu_text(s1), j1], [mu_text(s2), j2]], "derived": [d1, d2]}
                )
    return PreimageSearch(not conflicts, conflicts)


# -- solved-form PDEs and epsilon sections ----------------------------------


def _coerce(value, allowed):
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value, allowed)
    return Const(value)


class SolvedPde:
    """``H^k``: ``y^a_nu = f[a, nu](x, y_(k-1))`` for every ``|nu| = k``.

    ``space`` has order ``k``; the right-hand sides live on ``J^(k-1)``.
    """

    def __init__(self, space: JetSpace, f, name: str | None = None):
        if space.order < 1:
            raise ValueError("a solved-form PDE has order k >= 1")
        self.space = space
        self.name = name
        self.lower = space.with_order(space.order - 1)
        allowed = frozenset(self.lower.coordinates)
        table = {(a, tuple(sorted(nu))): _coerce(e, allowed) for (a, nu), e in f.items()}
        for a in range(1, space.m + 1):
            for nu in multi_indices(space.n, space.order):
                if (a, nu) not in table:
                    raise ValueError(f"missing f[{space.fiber[a - 1]};{mu_text(nu)}]")
        for key, e in table.items():
            if len(key[1]) != space.order:
                raise ValueError(f"f{key} is not a top-order equation")
            stray = e.free_vars - allowed
            if stray:
                raise ValueError(f"f{key} depends on {sorted(stray)}, outside J^{space.order - 1}")
        self.f = table

    @property
    def order(self):
        return self.space.order


class EpsilonSection:
    """Order-``(k+1)`` values ``g[a, sigma]`` on ``H^k``, as functions on ``J^(k-1)``."""

    def __init__(self, base: SolvedPde, g, name: str | None = None):
        self.base = base
        self.name = name
        allowed = frozenset(base.lower.coordinates)
        k = base.order
        table = {(a, tuple(sorted(s))): _coerce(e, allowed) for (a, s), e in g.items()}
        for a in range(1, base.space.m + 1):
            for sigma in multi_indices(base.space.n, k + 1):
                if (a, sigma) not in table:
                    raise ValueError(f"missing g[{base.space.fiber[a - 1]};{mu_text(sigma)}]")
        for key, e in table.items():
            if len(key[1]) != k + 1:
                raise ValueError(f"g{key} is not of order k+1")
            stray = e.free_vars - allowed
            if stray:
                raise ValueError(f"g{key} depends on {sorted(stray)}, outside J^{k - 1}")
        self.g = table


def reduce_to_first_order(pde: SolvedPde) -> Connection:
    """The first-order system on the fibered manifold with fiber coordinates ``y_(k-1)``.

    Its fiber names are the ``J^(k-1)`` coordinate names, so ``f`` needs no
    rewriting; holonomic solutions of ``H^k`` are exactly its solutions.
    """
    lower = pde.lower
    aux = JetSpace(lower.base, tuple(lower.jet_name(a, t) for a, t in lower.fiber_coordinates), 0,
                   max_base=lower.max_base)
    table = {}
    for idx, (alpha, tau) in enumerate(lower.fiber_coordinates, start=1):
        for j in range(1, lower.n + 1):
            up = add_index(tau, j)
            if len(up) < pde.order:
                table[(idx, (), j)] = Var(lower.jet_name(alpha, up))
            else:
                table[(idx, (), j)] = pde.f[(alpha, up)]
    return Connection(aux, table, name=pde.name)


def restricted_total_derivative(pde: SolvedPde, e: Expr, j: int, reduced: Connection | None = None) -> Expr:
    """``Df_j``: the total derivative along ``H^k`` of a function on ``J^(k-1)``."""
    return connection_total_derivative(reduced or reduce_to_first_order(pde), e, j)


def canonical_epsilon(pde: SolvedPde, name: str | None = None) -> EpsilonSection:
    """``g[a, sigma] = Df_j f[a, sigma - 1_j]`` with ``j`` the largest index of ``sigma``."""
    reduced = reduce_to_first_order(pde)
    g = {}
    for a in range(1, pde.space.m + 1):
        for sigma in multi_indices(pde.space.n, pde.order + 1):
            nu, j = sigma[:-1], sigma[-1]
            g[(a, sigma)] = restricted_total_derivative(pde, pde.f[(a, nu)], j, reduced)
    return EpsilonSection(pde, g, name=name)


def _connection_defects(eps: EpsilonSection, reduced: Connection) -> dict:
    pde = eps.base
    out = {}
    for a in range(1, pde.space.m + 1):
        for nu in multi_indices(pde.space.n, pde.order):
            for j in range(1, pde.space.n + 1):
                d = restricted_total_derivative(pde, pde.f[(a, nu)], j, reduced)
                out[(a, nu, j)] = simplify(Sub(d, eps.g[(a, add_index(nu, j))]))
    return out


@dataclass(frozen=True)
class EpsilonConnectionReport:
    is_connection: bool
    defects: dict
    verdicts: dict

    def to_dict(self):
        return {
            "is_connection": self.is_connection,
            "defects": {k: {"expr": str(self.defects[k]), **v.to_dict()} for k, v in self.verdicts.items()},
        }


def _defect_label(space: JetSpace, key) -> str:
    a, nu, j = key
    return f"E[{space.fiber[a - 1]};{mu_text(nu)};{j}]"


def epsilon_is_connection(eps: EpsilonSection, n_samples=DEFAULT_SAMPLES, tol=DEFAULT_TOL, seed=0, box=None):
    """``g[a, nu + 1_j] == Df_j f[a, nu]`` for every ``(nu, j)`` separately.

    Defects are reported as ``g[a, nu + 1_j] - Df_j f[a, nu]``.
    """
    reduced = reduce_to_first_order(eps.base)
    defects = _connection_defects(eps, reduced)
    space = eps.base.space
    labelled = {_defect_label(space, k): simplify(Neg(e)) for k, e in defects.items()}
    verdicts = {
        lbl: is_zero(e, n_samples=n_samples, tol=tol, domain_box=box, seed=seed) for lbl, e in labelled.items()
    }
    return EpsilonConnectionReport(all(v.is_zero for v in verdicts.values()), labelled, verdicts)


@dataclass(frozen=True)
class PhgCurvature:
    """Obstruction section of ``eps(H^k)``.

    Three families of functions on ``J^(k-1)``:

    * ``connection_defect``: ``Df_j f[a, nu] - g[a, nu + 1_j]``;
    * ``frobenius_defect``: curvature of the reduced first-order system;
    * ``prolongation_defect``: ``Df_j g[a, s] - Df_i g[a, s']`` for every two
      decompositions ``s + 1_j == s' + 1_i`` of an order-``(k+2)`` index.

    All vanish identically iff the prolongation map is onto; pointwise, their
    joint zero set is exactly the image of ``rho(eps(H^k))``.
    """

    space: JetSpace
    connection_defect: dict
    frobenius_defect: Curvature
    prolongation_defect: dict

    def labelled(self) -> list[tuple[str, Expr]]:
        out = [(_defect_label(self.space, k).replace("E[", "C[", 1), e) for k, e in self.connection_defect.items()]
        out += [(lbl.replace("R[", "F["), e) for lbl, e in self.frobenius_defect.labelled()]
        out += [(k, e) for k, e in self.prolongation_defect.items()]
        return out

    @property
    def rank(self) -> int:
        """Number of defect slots (the rank reported for the bundle F_1)."""
        return len(self.labelled())

    def evaluate_at(self, point) -> dict:
        items = self.labelled()
        values = evaluate_many([e for _, e in items], point) if items else []
        return {lbl: v for (lbl, _), v in zip(items, values)}

    def to_dict(self):
        return {lbl: str(e) for lbl, e in self.labelled()}

    def verdicts(self, n_samples=DEFAULT_SAMPLES, tol=DEFAULT_TOL, seed=0, box=None) -> dict:
        return {
            lbl: is_zero(e, n_samples=n_samples, tol=tol, domain_box=box, seed=seed) for lbl, e in self.labelled()
        }


def phg_curvature(eps: EpsilonSection) -> PhgCurvature:
    pde = eps.base
    reduced = reduce_to_first_order(pde)
    conn_defect = _connection_defects(eps, reduced)
    frob = curvature(reduced)
    prolong = {}
    n, k = pde.space.n, pde.order
    for a in range(1, pde.space.m + 1):
        for target in multi_indices(n, k + 2):
            pairs = decompositions(target)
            derived = [
                (s, j, restricted_total_derivative(pde, eps.g[(a, s)], j, reduced)) for s, j in pairs
            ]
            for (s1, j1, d1), (s2, j2, d2) in combinations(derived, 2):
                label = f"P[{pde.space.fiber[a - 1]};{mu_text(target)};({mu_text(s1)},{j1})|({mu_text(s2)},{j2})]"
                prolong[label] = simplify(Sub(d1, d2))
    return PhgCurvature(pde.space, conn_defect, frob, prolong)


@dataclass(frozen=True)
class ExactnessResult:
    preimage_exists: bool
    r_at_p: dict
    max_abs_r: float
    tol: float
    conflicts: list

    @property
    def consistent(self) -> bool:
        return self.preimage_exists == (self.max_abs_r < self.tol)

    def to_dict(self):
        return {
            "preimage_exists": self.preimage_exists,
            "R_at_p": dict(self.r_at_p),
            "max_abs_R": self.max_abs_r,
            "consistent": self.consistent,
            "conflicts": list(self.conflicts),
        }


def exactness_check_at(eps: EpsilonSection, p, tol: float = DEFAULT_TOL, curv: PhgCurvature | None = None):
    """Compare the brute-force preimage verdict with the phg curvature at ``p``.

    ``p`` gives values for the ``J^(k-1)`` coordinates.
    """
    pde = eps.base
    given = dict(((a, nu), e) for (a, nu), e in pde.f.items())
    given.update(eps.g)
    search = graph_preimage_search(pde.lower, given, p, tol)
    curv = curv or phg_curvature(eps)
    r = curv.evaluate_at(p)
    worst = max((abs(v) for v in r.values()), default=0.0)
    return ExactnessResult(search.exists, r, worst, tol, search.conflicts)
