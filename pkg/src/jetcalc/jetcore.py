"""Jet-space bookkeeping: multi-indices, coordinates, total derivatives.

Multi-indices are sorted tuples of 1-based base indices, so the symmetry of
mixed jets (``y_12 == y_21``) is built into the representation.  Fiber
indices ``alpha`` are 1-based as well.

Coordinate names follow one convention everywhere (files, traces, reports):
base names as declared (``x1 .. xn`` by default), order-0 jets are the fiber
names, higher jets are ``<fiber>_<mu digits>``, e.g. ``y_12`` or ``y1_112``.
"""

from __future__ import annotations

import keyword
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from .symexpr import FUNCTIONS, Var, diff, simplify
from .symexpr.nodes import Add, Mul

DEFAULT_MAX_ORDER = 6
DEFAULT_MAX_BASE = 4


class GridTooSmall(ValueError):
    pass


def multi_indices(n: int, order: int) -> list[tuple[int, ...]]:
    """All canonical multi-indices of the given order over base indices 1..n."""
    return list(combinations_with_replacement(range(1, n + 1), order))


def add_index(mu: tuple, j: int) -> tuple:
    """``mu + 1_j``: append ``j`` and re-sort."""
    return tuple(sorted(mu + (j,)))


def decompositions(sigma: tuple) -> list[tuple[tuple, int]]:
    """Distinct ways of writing ``sigma`` as ``nu + 1_j``."""
    out = []
    for j in sorted(set(sigma)):
        rest = list(sigma)
        rest.remove(j)
        out.append((tuple(rest), j))
    return out


def mu_text(mu) -> str:
    return "".join(str(i) for i in mu)


def parse_mu(text: str) -> tuple:
    if not text.isdigit() and text != "":
        raise ValueError(f"bad multi-index {text!r}")
    return tuple(sorted(int(c) for c in text))


@dataclass(frozen=True)
class JetSpace:
    """Coordinates of ``J^k(E)`` for a fibered manifold with the given names."""

    base: tuple
    fiber: tuple
    order: int
    max_order: int = DEFAULT_MAX_ORDER
    max_base: int = DEFAULT_MAX_BASE

    def __post_init__(self):
        object.__setattr__(self, "base", tuple(self.base))
        object.__setattr__(self, "fiber", tuple(self.fiber))
        if not self.base or not self.fiber:
            raise ValueError("need at least one base and one fiber coordinate")
        if self.order < 0:
            raise ValueError("jet order must be >= 0")
        if self.order > self.max_order:
            raise ValueError(f"jet order {self.order} exceeds the cap {self.max_order}")
        if self.n > self.max_base:
            raise ValueError(f"base dimension {self.n} exceeds the cap {self.max_base}")
        if self.n > 9 and self.order > 0:
            raise ValueError("jet names use one digit per index; n must be <= 9")
        for name in self.base + self.fiber:
            if not name.isidentifier() or keyword.iskeyword(name) or name in FUNCTIONS:
                raise ValueError(f"invalid coordinate name {name!r}")
        names = self.coordinates
        if len(set(names)) != len(names):
            raise ValueError("coordinate names are not pairwise distinct")

    @classmethod
    def standard(cls, n: int, m: int, k: int, **caps) -> "JetSpace":
        base = tuple(f"x{i}" for i in range(1, n + 1))
        fiber = ("y",) if m == 1 else tuple(f"y{a}" for a in range(1, m + 1))
        return cls(base, fiber, k, **caps)

    @property
    def n(self) -> int:
        return len(self.base)

    @property
    def m(self) -> int:
        return len(self.fiber)

    @property
    def k(self) -> int:
        return self.order

    def with_order(self, k: int) -> "JetSpace":
        return JetSpace(self.base, self.fiber, k, max(self.max_order, k), self.max_base)

    def jet_name(self, alpha: int, mu: tuple) -> str:
        name = self.fiber[alpha - 1]
        return name if not mu else f"{name}_{mu_text(sorted(mu))}"

    def base_name(self, j: int) -> str:
        return self.base[j - 1]

    def jets(self, max_order: int | None = None) -> list[tuple[int, tuple]]:
        """``(alpha, mu)`` pairs ordered by ``(|mu|, alpha, mu)``."""
        top = self.order if max_order is None else max_order
        return [
            (alpha, mu)
            for r in range(top + 1)
            for alpha in range(1, self.m + 1)
            for mu in multi_indices(self.n, r)
        ]

    @cached_property
    def fiber_coordinates(self) -> tuple:
        return tuple(self.jets())

    @cached_property
    def coordinates(self) -> tuple:
        return self.base + tuple(self.jet_name(a, mu) for a, mu in self.jets())

    @cached_property
    def _lookup(self) -> dict:
        table = {name: ("base", j) for j, name in enumerate(self.base, start=1)}
        for alpha, mu in self.fiber_coordinates:
            table[self.jet_name(alpha, mu)] = ("jet", alpha, mu)
        return table

    def locate(self, name: str):
        """``('base', j)`` or ``('jet', alpha, mu)`` for a coordinate name."""
        try:
            return self._lookup[name]
        except KeyError:
            raise KeyError(f"{name!r} is not a coordinate of J^{self.order}") from None

    def dimension(self) -> int:
        return self.n + self.m * comb(self.n + self.order, self.order)


def enumerate_coordinates(space: JetSpace) -> list[str]:
    return list(space.coordinates)


def total_derivative(space: JetSpace, e, j: int):
    """``D_j e`` for ``e`` on ``J^k``; the result lives on ``J^(k+1)``."""
    free = e.free_vars
    terms = [diff(e, space.base_name(j))]
    for alpha, mu in space.fiber_coordinates:
        name = space.jet_name(alpha, mu)
        if name in free:
            terms.append(Mul((diff(e, name), Var(space.jet_name(alpha, add_index(mu, j))))))
    return simplify(terms[0] if len(terms) == 1 else Add(terms))


class CanonicalInclusion:
    """Coordinate form of ``J^(k+1)(E) -> J^1(J^k(E))``.

    ``J^1(J^k)`` carries the ``J^k`` coordinates plus first derivatives of every
    fiber coordinate, labelled ``"<jet name>,<j>"`` (``y_1,2`` is
    ``(y_1),_2``).  The inclusion sends ``(y^a_mu),_j`` to ``y^a_(mu + 1_j)``.
    """

    def __init__(self, space: JetSpace):
        self.space = space
        self.target = space.with_order(space.order + 1)
        self.labels = tuple(
            f"{space.jet_name(a, mu)},{j}"
            for a, mu in space.fiber_coordinates
            for j in range(1, space.n + 1)
        )
        self.mapping = {}
        for a, mu in space.fiber_coordinates:
            for j in range(1, space.n + 1):
                self.mapping[f"{space.jet_name(a, mu)},{j}"] = self.target.jet_name(a, add_index(mu, j))

    @property
    def coordinates(self) -> tuple:
        return self.space.coordinates + self.labels

    def coordinate_map(self) -> dict:
        out = {name: name for name in self.space.coordinates}
        out.update(self.mapping)
        return out

    def embed(self, point) -> dict:
        """Image of a ``J^(k+1)`` point."""
        return {c: float(point[src]) for c, src in self.coordinate_map().items()}

    def project(self, point) -> dict:
        """Forget the second layer: ``J^1(J^k) -> J^k``."""
        return {c: point[c] for c in self.space.coordinates}

    def in_image(self, point, tol: float = 0.0) -> bool:
        """Whether a ``J^1(J^k)`` point lies in the image of ``J^(k+1)``."""
        seen = {}
        for label, target in self.mapping.items():
            value = point[label]
            if target in self.space.coordinates:
                ref = point[target]
            else:
                ref = seen.setdefault(target, value)
            if abs(value - ref) > tol:
                return False
        return True

    def preimage(self, point) -> dict:
        """Recover the ``J^(k+1)`` point from a point in the image."""
        out = {c: point[c] for c in self.space.coordinates}
        for label, target in self.mapping.items():
            out.setdefault(target, point[label])
        return {c: out[c] for c in self.target.coordinates}


def canonical_inclusion(space: JetSpace) -> CanonicalInclusion:
    return CanonicalInclusion(space)


def holonomy_defect(trace) -> float:
    """Largest mismatch between central differences of ``y^a_mu`` and ``y^a_(mu+1_j)``.

    Taken over interior grid nodes and all ``|mu| < k``.
    """
    space = trace.space
    if space.order < 1:
        raise ValueError("holonomy defect needs a trace of a jet section (k >= 1)")
    values = trace.values
    grid_shape = values.shape[:-1]
    if any(s < 3 for s in grid_shape):
        raise GridTooSmall(f"need at least 3 nodes per axis, got {grid_shape}")
    h = trace.box.h
    index = {c: i for i, c in enumerate(space.fiber_coordinates)}
    interior = tuple(slice(1, -1) for _ in grid_shape)
    worst = 0.0
    for alpha, mu in space.fiber_coordinates:
        if len(mu) >= space.order:
            continue
        field = values[..., index[(alpha, mu)]]
        for j in range(1, space.n + 1):
            axis = j - 1
            fwd = np.roll(field, -1, axis=axis)
            bwd = np.roll(field, 1, axis=axis)
            central = (fwd - bwd) / (2 * h)
            target = values[..., index[(alpha, add_index(mu, j))]]
            defect = np.abs(central - target)[interior]
            if defect.size:
                worst = max(worst, float(defect.max()))
    return worst
