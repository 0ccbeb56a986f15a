"""Connections on J^k(E), their curvature, and geometric connections.

A connection of order ``k`` prescribes every first partial of every fiber
coordinate of ``J^k(E)``:  ``d y^a_mu / d x^j = c[a, mu, j](x, y_k)``.

Sign convention for curvature: for ``r < j``

    R[a, mu, (r, j)] = Dc_j c[a, mu, r] - Dc_r c[a, mu, j]

i.e. the alternation ``A_rj - A_jr`` of ``A_rj = Dc_j c[a, mu, r]`` with no
factor one half.  At ``k = 0`` this is the classical integrability defect of
``dy/dx^j = c_j``; only its zero locus is used anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .jetcore import JetSpace, add_index, decompositions, mu_text, multi_indices
from .symexpr import (
    ZERO,
    Const,
    Expr,
    Neg,
    Var,
    ZeroKind,
    diff,
    equivalent,
    evaluate_many,
    is_zero,
    parse,
    simplify,
)
from .symexpr.nodes import Add, Mul
from .symexpr.zero import DEFAULT_SAMPLES, DEFAULT_TOL

CONVENTION_NOTE = (
    "R[a;mu;(r,j)] = Dc_j c[a;mu;r] - Dc_r c[a;mu;j] (alternation without 1/2); "
    "transformation law under chart changes not verified"
)


def _coerce(value, allowed):
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value, allowed)
    return Const(value)


class Connection:
    """A crossection of ``J^1(J^k(E)) -> J^k(E)`` given by its coefficient table.

    ``coefficients`` maps ``(alpha, mu, j)`` to an expression (or source
    text) over the ``J^k`` coordinates of ``space``.
    """

    def __init__(self, space: JetSpace, coefficients, name: str | None = None):
        self.space = space
        self.name = name
        allowed = frozenset(space.coordinates)
        table = {}
        for (alpha, mu, j), value in coefficients.items():
            key = (alpha, tuple(sorted(mu)), j)
            table[key] = _coerce(value, allowed)
        missing = [
            (a, mu, j)
            for a, mu in space.fiber_coordinates
            for j in range(1, space.n + 1)
            if (a, mu, j) not in table
        ]
        if missing:
            a, mu, j = missing[0]
            raise ValueError(f"missing coefficient c[{space.fiber[a - 1]};{mu_text(mu)};{j}]")
        extra = set(table) - {
            (a, mu, j) for a, mu in space.fiber_coordinates for j in range(1, space.n + 1)
        }
        if extra:
            raise ValueError(f"coefficients outside the index range: {sorted(extra)}")
        for key, e in table.items():
            stray = e.free_vars - allowed
            if stray:
                raise ValueError(f"coefficient {key} uses non-J^{space.order} variables {sorted(stray)}")
        self.coefficients = table

    @property
    def order(self) -> int:
        return self.space.order

    def coefficient(self, alpha: int, mu: tuple, j: int) -> Expr:
        return self.coefficients[(alpha, tuple(sorted(mu)), j)]

    def label(self, alpha, mu, j) -> str:
        return f"c[{self.space.fiber[alpha - 1]};{mu_text(mu)};{j}]"

    def __repr__(self):
        return f"Connection(order={self.order}, n={self.space.n}, m={self.space.m}, name={self.name!r})"


def connection_total_derivative(conn: Connection, e: Expr, r: int) -> Expr:
    """``Dc_r e = d_r e + sum c[b, mu, r] d e / d y^b_mu``; stays on ``J^k``."""
    space = conn.space
    free = e.free_vars
    terms = [diff(e, space.base_name(r))]
    for beta, mu in space.fiber_coordinates:
        name = space.jet_name(beta, mu)
        if name in free:
            terms.append(Mul((diff(e, name), conn.coefficient(beta, mu, r))))
    return simplify(terms[0] if len(terms) == 1 else Add(terms))


@dataclass(frozen=True)
class Curvature:
    """Curvature components, stored for ``r < j`` only."""

    space: JetSpace
    components: dict = field(repr=False)

    def component(self, alpha: int, mu: tuple, r: int, j: int) -> Expr:
        mu = tuple(sorted(mu))
        if r == j:
            return ZERO
        if r < j:
            return self.components[(alpha, mu, (r, j))]
        return simplify(Neg(self.components[(alpha, mu, (j, r))]))

    def label(self, key) -> str:
        alpha, mu, (r, j) = key
        return f"R[{self.space.fiber[alpha - 1]};{mu_text(mu)};({r},{j})]"

    def items(self):
        return self.components.items()

    def labelled(self) -> list[tuple[str, Expr]]:
        return [(self.label(k), e) for k, e in self.components.items()]

    def to_dict(self):
        return {lbl: str(e) for lbl, e in self.labelled()}

    def evaluate_at(self, point) -> dict:
        keys = list(self.components)
        values = evaluate_many([self.components[k] for k in keys], point) if keys else []
        return {self.label(k): v for k, v in zip(keys, values)}


def curvature(conn: Connection) -> Curvature:
    space = conn.space
    comps = {}
    for alpha, mu in space.fiber_coordinates:
        for r in range(1, space.n + 1):
            for j in range(r + 1, space.n + 1):
                a_rj = connection_total_derivative(conn, conn.coefficient(alpha, mu, r), j)
                a_jr = connection_total_derivative(conn, conn.coefficient(alpha, mu, j), r)
                comps[(alpha, mu, (r, j))] = simplify(a_rj - a_jr)
    return Curvature(space, comps)


@dataclass(frozen=True)
class FlatnessReport:
    flat: bool
    verdicts: dict
    symbolic_only: bool = False

    @property
    def kind(self) -> str:
        if not self.flat:
            return "NOT FLAT"
        if all(v.kind is ZeroKind.SYMBOLIC for v in self.verdicts.values()):
            return "FLAT (symbolic)"
        return "FLAT (numeric)"

    def witness(self):
        for label, v in self.verdicts.items():
            if v.kind is ZeroKind.NONZERO:
                return label, v
        return None

    def to_dict(self):
        return {
            "flat": self.flat,
            "status": self.kind,
            "symbolic_only": self.symbolic_only,
            "components": {k: v.to_dict() for k, v in self.verdicts.items()},
        }


def is_flat(
    conn: Connection,
    n_samples=DEFAULT_SAMPLES,
    tol=DEFAULT_TOL,
    box=None,
    symbolic=False,
    seed=0,
    curv: Curvature | None = None,
) -> FlatnessReport:
    """Zero-test every curvature component.

    With ``symbolic=True`` only literal zeros after simplification count.
    """
    curv = curv or curvature(conn)
    verdicts = {}
    for key, e in curv.items():
        verdicts[curv.label(key)] = is_zero(e, n_samples=n_samples, tol=tol, domain_box=box, seed=seed)
    if symbolic:
        flat = all(v.kind is ZeroKind.SYMBOLIC for v in verdicts.values())
    else:
        flat = all(v.is_zero for v in verdicts.values())
    return FlatnessReport(flat, verdicts, symbolic)


def split(conn: Connection, q, v) -> tuple[tuple, tuple]:
    """Split a tangent vector ``v = (v^i, v^a)`` at ``q`` into the two summands

    ``(v^i, v^a - v^s c_s^a)`` and ``(0, v^s c_s^a)``, in that order.
    """
    space = conn.space
    if conn.order != 0:
        raise ValueError("split is defined for connections on E (k = 0)")
    v = [float(t) for t in v]
    n, m = space.n, space.m
    if len(v) != n + m:
        raise ValueError(f"tangent vector needs {n + m} components")
    exprs = [conn.coefficient(a, (), s) for a in range(1, m + 1) for s in range(1, n + 1)]
    c = evaluate_many(exprs, q)
    flow = [sum(v[s] * c[(a * n) + s] for s in range(n)) for a in range(m)]
    first = tuple(v[:n]) + tuple(v[n + a] - flow[a] for a in range(m))
    second = (0.0,) * n + tuple(flow)
    return first, second


@dataclass(frozen=True)
class GeometricReport:
    geometric: bool
    violations: list

    def to_dict(self):
        return {"geometric": self.geometric, "violations": list(self.violations)}


def is_geometric(conn: Connection, n_samples=DEFAULT_SAMPLES, tol=DEFAULT_TOL, seed=0) -> GeometricReport:
    """Check that lower coefficients are the next jets and top ones are symmetric."""
    space = conn.space
    k = conn.order
    violations = []
    if k == 0:
        return GeometricReport(True, [])
    for alpha, mu in space.fiber_coordinates:
        if len(mu) < k:
            for j in range(1, space.n + 1):
                expected = Var(space.jet_name(alpha, add_index(mu, j)))
                v = equivalent(conn.coefficient(alpha, mu, j), expected, n_samples=n_samples, tol=tol, seed=seed)
                if not v.is_zero:
                    violations.append(
                        f"{conn.label(alpha, mu, j)} = {conn.coefficient(alpha, mu, j)} "
                        f"is not {expected}"
                    )
    for alpha in range(1, space.m + 1):
        for sigma in multi_indices(space.n, k + 1):
            pairs = decompositions(sigma)
            nu0, j0 = pairs[0]
            for nu, j in pairs[1:]:
                v = equivalent(
                    conn.coefficient(alpha, nu0, j0),
                    conn.coefficient(alpha, nu, j),
                    n_samples=n_samples,
                    tol=tol,
                    seed=seed,
                )
                if not v.is_zero:
                    violations.append(
                        f"asymmetric top: {conn.label(alpha, nu0, j0)} != {conn.label(alpha, nu, j)}"
                    )
    return GeometricReport(not violations, violations)


@dataclass(frozen=True)
class GeometricSpec:
    """Top coefficients of a geometric connection, keyed ``(alpha, sigma)`` with ``|sigma| = k+1``."""

    space: JetSpace
    top: dict

    def __post_init__(self):
        allowed = frozenset(self.space.coordinates)
        top = {(a, tuple(sorted(s))): _coerce(e, allowed) for (a, s), e in self.top.items()}
        k = self.space.order
        for alpha in range(1, self.space.m + 1):
            for sigma in multi_indices(self.space.n, k + 1):
                if (alpha, sigma) not in top:
                    raise ValueError(
                        f"missing ctop[{self.space.fiber[alpha - 1]};{mu_text(sigma)}]"
                    )
        object.__setattr__(self, "top", top)


def make_geometric(spec: GeometricSpec, name: str | None = None) -> Connection:
    space = spec.space
    k = space.order
    table = {}
    for alpha, mu in space.fiber_coordinates:
        for j in range(1, space.n + 1):
            if len(mu) < k:
                table[(alpha, mu, j)] = Var(space.jet_name(alpha, add_index(mu, j)))
            else:
                table[(alpha, mu, j)] = spec.top[(alpha, add_index(mu, j))]
    return Connection(space, table, name=name)
