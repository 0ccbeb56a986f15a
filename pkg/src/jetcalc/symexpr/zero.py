"""Deciding identical vanishing: symbolic first, then randomized sampling."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .calculus import simplify
from .evaluate import EvalDomainError, vectorize
from .nodes import Const, Sub, as_expr

DEFAULT_SAMPLES = 200
DEFAULT_TOL = 1e-9
DEFAULT_INTERVAL = (-2.0, 2.0)
_MAX_REDRAWS = 50


class ZeroKind(enum.Enum):
    SYMBOLIC = "SymbolicZero"
    NUMERIC = "NumericZero"
    NONZERO = "NonZero"


@dataclass(frozen=True)
class ZeroVerdict:
    kind: ZeroKind
    witness: dict | None = None
    value: float | None = None

    @property
    def is_zero(self) -> bool:
        return self.kind is not ZeroKind.NONZERO

    def to_dict(self):
        return {"verdict": self.kind.value, "witness": self.witness, "value": self.value}


def is_zero(e, n_samples=DEFAULT_SAMPLES, tol=DEFAULT_TOL, domain_box=None, seed=0) -> ZeroVerdict:
    """Classify ``e`` as symbolically zero, numerically zero, or nonzero with a witness.

    ``domain_box`` maps variable names to ``(lo, hi)``; unlisted variables use
    [-2, 2].  Sample points where ``e`` is undefined are redrawn a bounded
    number of times before :class:`EvalDomainError` is raised.
    """
    if n_samples < 1 or tol <= 0:
        raise ValueError("need n_samples >= 1 and tol > 0")
    s = simplify(as_expr(e))
    if isinstance(s, Const) and s.value == 0:
        return ZeroVerdict(ZeroKind.SYMBOLIC)
    variables = tuple(sorted(s.free_vars))
    if not variables:
        return ZeroVerdict(ZeroKind.NONZERO, {}, float(s.value))
    box = dict(domain_box or {})
    lo = np.array([box.get(v, DEFAULT_INTERVAL)[0] for v in variables], dtype=float)
    hi = np.array([box.get(v, DEFAULT_INTERVAL)[1] for v in variables], dtype=float)
    rng = np.random.default_rng(seed)
    fn = vectorize((s,), variables)

    points = lo + (hi - lo) * rng.random((n_samples, len(variables)))
    values = fn(*points.T)[0]
    for _ in range(_MAX_REDRAWS):
        bad = ~np.isfinite(values)
        if not bad.any():
            break
        fresh = lo + (hi - lo) * rng.random((int(bad.sum()), len(variables)))
        points[bad] = fresh
        values[bad] = fn(*fresh.T)[0]
    else:
        raise EvalDomainError(f"could not find {n_samples} points in the domain of {s}")

    worst = int(np.argmax(np.abs(values)))
    if abs(values[worst]) < tol:
        return ZeroVerdict(ZeroKind.NUMERIC)
    witness = {v: float(x) for v, x in zip(variables, points[worst])}
    return ZeroVerdict(ZeroKind.NONZERO, witness, float(values[worst]))


def equivalent(a, b, **kwargs) -> ZeroVerdict:
    """Zero test of ``a - b``."""
    return is_zero(Sub(as_expr(a), as_expr(b)), **kwargs)
