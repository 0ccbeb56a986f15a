"""Integrating connections on a grid by successive one-dimensional RK4 sweeps.

The system ``d y^a_mu / d x^j = c[a, mu, j]`` is integrated first along axis
1 through the initial node, then along axis 2 from every node of that line,
and so on.  For a flat connection this approximates the unique local
solution; for a curved one the result depends on the axis order, which
:func:`path_dependence` measures.
"""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field

import numpy as np

from .connection import Connection, is_flat, is_geometric
from .jetcore import JetSpace, holonomy_defect, multi_indices
from .phg import NotGeometric
from .symexpr import EvalDomainError, vectorize


class NonFiniteEncountered(ArithmeticError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"non-finite value reached at grid node {node}")


@dataclass(frozen=True)
class GridBox:
    lo: tuple
    hi: tuple
    h: float

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi differ in dimension")
        if self.h <= 0:
            raise ValueError("step must be positive")
        for lo, hi in zip(self.lo, self.hi):
            if not lo < hi:
                raise ValueError(f"empty interval [{lo}, {hi}]")
        if min(self.shape) < 2:
            raise ValueError("step larger than the box")

    @classmethod
    def parse(cls, text: str, h: float) -> "GridBox":
        """``"0:1,0:1"`` -> box ``[0,1]^2``."""
        lo, hi = [], []
        for part in text.split(","):
            a, b = part.split(":")
            lo.append(float(a))
            hi.append(float(b))
        return cls(tuple(lo), tuple(hi), h)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple:
        out = []
        for lo, hi in zip(self.lo, self.hi):
            steps = (hi - lo) / self.h
            n = round(steps)
            if abs(steps - n) > 1e-9 * max(1.0, steps):
                raise ValueError(f"interval [{lo}, {hi}] is not a multiple of the step {self.h}")
            out.append(n + 1)
        return tuple(out)

    def axes(self) -> list:
        return [lo + self.h * np.arange(n) for lo, n in zip(self.lo, self.shape)]

    def node_index(self, x) -> tuple:
        idx = []
        for j, (lo, n) in enumerate(zip(self.lo, self.shape)):
            t = (float(x[j]) - lo) / self.h
            i = round(t)
            if abs(t - i) > 1e-7 or not 0 <= i < n:
                raise ValueError(f"initial base point {tuple(x)} is not a node of the box")
            idx.append(i)
        return tuple(idx)


@dataclass(frozen=True)
class SolutionTrace:
    """Fiber values of a gridded section, ``values[i1, ..., in, :]``."""

    space: JetSpace
    box: GridBox
    values: np.ndarray = field(repr=False)
    metadata: dict = field(default_factory=dict)

    @property
    def coordinates(self) -> tuple:
        return self.space.coordinates

    def field(self, name: str) -> np.ndarray:
        kind = self.space.locate(name)
        if kind[0] == "base":
            grids = np.meshgrid(*self.box.axes(), indexing="ij")
            return grids[kind[1] - 1]
        index = self.space.fiber_coordinates.index((kind[1], kind[2]))
        return self.values[..., index]

    def rows(self):
        axes = self.box.axes()
        for node in np.ndindex(*self.values.shape[:-1]):
            base = [axes[j][i] for j, i in enumerate(node)]
            yield base + list(self.values[node])

    def to_csv(self, target=None) -> str:
        """CSV with one row per node in lexicographic node order, 17 significant digits."""
        buf = io.StringIO()
        buf.write(",".join(self.coordinates) + "\n")
        for row in self.rows():
            buf.write(",".join(f"{float(v):.17g}" for v in row) + "\n")
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", newline="") as fh:
                fh.write(text)
        return text


def _as_point(space: JetSpace, init) -> dict:
    if isinstance(init, dict):
        return {c: float(init[c]) for c in space.coordinates}
    values = [float(v) for v in init]
    if len(values) != len(space.coordinates):
        raise ValueError(f"initial condition needs {len(space.coordinates)} values in coordinate order")
    return dict(zip(space.coordinates, values))


class _AxisField:
    """Vectorized right-hand side along one axis."""

    def __init__(self, conn: Connection, j: int):
        space = conn.space
        exprs = [conn.coefficient(a, mu, j) for a, mu in space.fiber_coordinates]
        self.fn = vectorize(exprs, space.coordinates)
        self.n = space.n

    def __call__(self, x, y):
        # x: (batch, n), y: (batch, F) -> (batch, F)
        out = self.fn(*x.T, *y.T)
        return np.moveaxis(out, 0, -1)


def _rk4_step(rhs, x, y, j, t0, t1):
    s = t1 - t0
    xm = x.copy()
    xm[:, j] = 0.5 * (t0 + t1)
    xe = x.copy()
    xe[:, j] = t1
    # overflow shows up as inf/nan and is reported by the caller
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = rhs(x, y)
        k2 = rhs(xm, y + 0.5 * s * k1)
        k3 = rhs(xm, y + 0.5 * s * k2)
        k4 = rhs(xe, y + s * k3)
        return xe, y + (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(conn: Connection, init, box: GridBox, axis_order=None) -> SolutionTrace:
    """Sweep the connection over ``box`` from the initial node (classical RK4)."""
    space = conn.space
    if box.dim != space.n:
        raise ValueError("box dimension differs from the base dimension")
    point = _as_point(space, init)
    x0 = [point[b] for b in space.base]
    y0 = np.array([point[space.jet_name(a, mu)] for a, mu in space.fiber_coordinates])
    order = list(axis_order or range(1, space.n + 1))
    if sorted(order) != list(range(1, space.n + 1)):
        raise ValueError("axis order must be a permutation of 1..n")
    shape = box.shape
    start = box.node_index(x0)
    axes = box.axes()
    values = np.full(shape + (len(y0),), np.nan)
    values[start] = y0
    rhs = {j: _AxisField(conn, j) for j in order}

    # nodes reached so far: a slab fixed at `start` on the axes not yet swept
    done = []
    for j in order:
        ax = j - 1
        # the batch is every node with the already-swept axes free and the rest at `start`
        free_shape = [shape[a - 1] for a in done]
        slab = list(itertools.product(*[range(n) for n in free_shape])) if done else [()]
        base_idx = []
        for s in slab:
            idx = list(start)
            for a, i in zip(done, s):
                idx[a - 1] = i
            base_idx.append(idx)
        base_idx = np.array(base_idx, dtype=int).reshape(len(slab), space.n)
        for direction in (1, -1):
            cur = base_idx.copy()
            x = np.array([[axes[a][i] for a, i in enumerate(row)] for row in cur])
            y = values[tuple(cur.T)]
            i = start[ax]
            while 0 <= i + direction < shape[ax]:
                t0, t1 = axes[ax][i], axes[ax][i + direction]
                x, y = _rk4_step(rhs[j], x, y, ax, t0, t1)
                i += direction
                cur[:, ax] = i
                if not np.all(np.isfinite(y)):
                    bad = int(np.argmax(~np.all(np.isfinite(y), axis=1)))
                    raise NonFiniteEncountered(tuple(int(v) for v in cur[bad]))
                values[tuple(cur.T)] = y
        done.append(j)

    meta = {
        "connection": conn.name,
        "init": [point[c] for c in space.coordinates],
        "h": box.h,
        "integrator": "RK4",
        "axis_order": order,
    }
    return SolutionTrace(space, box, values, meta)


# -- path dependence ---------------------------------------------------------


def _steps(a: float, b: float, h: float) -> int:
    t = abs(b - a) / h
    n = round(t)
    if abs(t - n) > 1e-7:
        raise ValueError(f"segment [{a}, {b}] is not a multiple of the step {h}")
    return n


def terminal_value(conn: Connection, init, corner, h: float, axis_order) -> np.ndarray:
    """Fiber values at ``corner`` after integrating along the axes in the given order."""
    space = conn.space
    point = _as_point(space, init)
    x = np.array([[point[b] for b in space.base]])
    y = np.array([[point[space.jet_name(a, mu)] for a, mu in space.fiber_coordinates]])
    for j in axis_order:
        ax = j - 1
        a, b = x[0, ax], float(corner[ax])
        n = _steps(a, b, h)
        rhs = _AxisField(conn, j)
        for i in range(n):
            t0 = a + (b - a) * i / n
            t1 = a + (b - a) * (i + 1) / n
            x, y = _rk4_step(rhs, x, y, ax, t0, t1)
            if not np.all(np.isfinite(y)):
                raise NonFiniteEncountered(tuple(x[0]))
    return y[0]


def path_dependence(conn: Connection, init, corner, h: float) -> float:
    """Max-norm discrepancy of terminal values over all pairs of axis orders."""
    n = conn.space.n
    if n == 1:
        return 0.0
    ends = [terminal_value(conn, init, corner, h, perm) for perm in itertools.permutations(range(1, n + 1))]
    worst = 0.0
    for a, b in itertools.combinations(ends, 2):
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst


def signed_holonomy(conn: Connection, init, corner, h: float, r: int = 1, j: int = 2) -> np.ndarray:
    """Terminal value sweeping ``j`` first minus sweeping ``r`` first (other axes after).

    For a small square this is approximately area times ``R[., ., (r, j)]``.
    """
    rest = [a for a in range(1, conn.space.n + 1) if a not in (r, j)]
    return terminal_value(conn, init, corner, h, [j, r] + rest) - terminal_value(
        conn, init, corner, h, [r, j] + rest
    )


# -- geometric connections ---------------------------------------------------


@dataclass(frozen=True)
class GeometricSolution:
    trace: SolutionTrace
    holonomy_defect: float
    second_difference_residual: float | None
    geometric: bool
    flat: bool

    def to_dict(self):
        return {
            "holonomy_defect": self.holonomy_defect,
            "second_difference_residual": self.second_difference_residual,
            "geometric": self.geometric,
            "flat": self.flat,
        }


def _second_difference_residual(conn: Connection, trace: SolutionTrace) -> float:
    space = conn.space
    h = trace.box.h
    grids = np.meshgrid(*trace.box.axes(), indexing="ij")
    worst = 0.0
    for alpha in range(1, space.m + 1):
        y = trace.field(space.jet_name(alpha, ()))
        for sigma in multi_indices(space.n, 2):
            a, b = sigma[0] - 1, sigma[1] - 1
            if a == b:
                d2 = (np.roll(y, -1, a) - 2 * y + np.roll(y, 1, a)) / h**2
            else:
                pp = np.roll(np.roll(y, -1, a), -1, b)
                pm = np.roll(np.roll(y, -1, a), 1, b)
                mp = np.roll(np.roll(y, 1, a), -1, b)
                mm = np.roll(np.roll(y, 1, a), 1, b)
                d2 = (pp - pm - mp + mm) / (4 * h**2)
            top = vectorize([conn.coefficient(alpha, (sigma[0],), sigma[1])], space.coordinates)(
                *grids, *[trace.values[..., i] for i in range(trace.values.shape[-1])]
            )[0]
            interior = tuple(slice(1, -1) for _ in range(space.n))
            worst = max(worst, float(np.max(np.abs(d2 - top)[interior])))
    return worst


def solve_geometric(conn: Connection, init, box: GridBox, strict: bool = False, n_samples: int = 200,
                    tol: float = 1e-9) -> GeometricSolution:
    """Integrate a geometric connection and report how holonomic the result is."""
    report = is_geometric(conn, n_samples=n_samples, tol=tol)
    if strict and not report.geometric:
        raise NotGeometric("; ".join(report.violations))
    flat = is_flat(conn, n_samples=n_samples, tol=tol).flat
    trace = integrate(conn, init, box)
    defect = holonomy_defect(trace) if conn.order >= 1 else 0.0
    residual = _second_difference_residual(conn, trace) if conn.order == 1 else None
    return GeometricSolution(trace, defect, residual, report.geometric, flat)


def max_error(trace: SolutionTrace, name: str, exact) -> float:
    """Max over the grid of ``|trace[name] - exact(x)|``; ``exact`` is an Expr on the base."""
    grids = np.meshgrid(*trace.box.axes(), indexing="ij")
    ref = vectorize([exact], trace.space.base)(*grids)[0]
    err = np.abs(trace.field(name) - ref)
    if not np.all(np.isfinite(err)):
        raise EvalDomainError("exact solution is not finite on the grid")
    return float(err.max())


__all__ = [
    "GeometricSolution", "GridBox", "NonFiniteEncountered", "NotGeometric", "SolutionTrace",
    "integrate", "max_error", "path_dependence", "signed_holonomy", "solve_geometric", "terminal_value",
]

