"""Numeric evaluation by compiling expression trees to Python functions.

Three backends share one code generator: ``math`` (scalar floats, domain
violations raise :class:`EvalDomainError`), ``numpy`` (vectorized, domain
violations surface as non-finite entries) and ``mpmath`` (arbitrary
precision, used by the test oracles).
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np

from .nodes import Add, Const, Div, Func, Mul, Neg, Pow, Sub, Var
from .parser import UnknownVariable

BACKENDS = ("math", "numpy", "mpmath")


class EvalDomainError(ArithmeticError):
    """Raised when an expression is evaluated outside its domain."""


def _const_src(value, backend):
    if backend == "mpmath" and isinstance(value, Fraction):
        return f"(_mpf({value.numerator})/_mpf({value.denominator}))"
    return repr(float(value))


def _src(e, names, backend):
    if isinstance(e, Const):
        return _const_src(e.value, backend)
    if isinstance(e, Var):
        try:
            return names[e.name]
        except KeyError:
            raise UnknownVariable(e.name) from None
    if isinstance(e, Add):
        return "(" + " + ".join(_src(t, names, backend) for t in e.terms) + ")"
    if isinstance(e, Sub):
        return f"({_src(e.left, names, backend)} - {_src(e.right, names, backend)})"
    if isinstance(e, Mul):
        return "(" + " * ".join(_src(f, names, backend) for f in e.factors) + ")"
    if isinstance(e, Div):
        return f"({_src(e.num, names, backend)} / {_src(e.den, names, backend)})"
    if isinstance(e, Neg):
        return f"(-{_src(e.arg, names, backend)})"
    if isinstance(e, Pow):
        base = _src(e.base, names, backend)
        if e.exp < 0:
            return f"(1.0 / ({base}) ** {-e.exp})" if backend != "mpmath" else f"(1 / ({base}) ** {-e.exp})"
        return f"(({base}) ** {e.exp})"
    if isinstance(e, Func):
        return f"_{e.name}({_src(e.arg, names, backend)})"
    raise TypeError(f"not an expression: {e!r}")


def _namespace(backend):
    if backend == "math":
        mod = math
    elif backend == "numpy":
        mod = np
    elif backend == "mpmath":
        mod = mpmath
    else:
        raise ValueError(f"unknown backend {backend!r}")
    ns = {f"_{name}": getattr(mod, name) for name in ("sin", "cos", "exp", "log", "sqrt")}
    ns["_mpf"] = mpmath.mpf
    return ns


@lru_cache(maxsize=20_000)
def compile_exprs(exprs: tuple, variables: tuple, backend: str = "math"):
    """Compile ``exprs`` into ``fn(*values) -> tuple`` with positional ``variables``."""
    names = {v: f"_a{i}" for i, v in enumerate(variables)}
    body = ", ".join(_src(e, names, backend) for e in exprs)
    args = ", ".join(names[v] for v in variables)
    ret = f"({body},)" if exprs else "()"
    src = f"def _compiled({args}):\n    return {ret}\n"
    ns = _namespace(backend)
    exec(compile(src, "<jetcalc-expr>", "exec"), ns)
    return ns["_compiled"]


def evaluate(e, binding) -> float:
    """Evaluate ``e`` at ``binding`` (a mapping name -> float) in double precision."""
    variables = tuple(sorted(e.free_vars))
    fn = compile_exprs((e,), variables, "math")
    try:
        args = [float(binding[v]) for v in variables]
    except KeyError as exc:
        raise UnknownVariable(exc.args[0]) from None
    try:
        value = fn(*args)[0]
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise EvalDomainError(f"{e} at {dict(zip(variables, args))}: {exc}") from None
    if isinstance(value, complex) or not math.isfinite(value):
        raise EvalDomainError(f"{e} is not finite at {dict(zip(variables, args))}")
    return float(value)


def evaluate_many(exprs, binding) -> list:
    """Evaluate several expressions at one binding (scalar backend)."""
    exprs = tuple(exprs)
    variables = tuple(sorted(set().union(*(e.free_vars for e in exprs)))) if exprs else ()
    fn = compile_exprs(exprs, variables, "math")
    try:
        args = [float(binding[v]) for v in variables]
    except KeyError as exc:
        raise UnknownVariable(exc.args[0]) from None
    try:
        values = fn(*args)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise EvalDomainError(f"evaluation failed at {dict(zip(variables, args))}: {exc}") from None
    out = [float(v) for v in values]
    if not all(math.isfinite(v) for v in out):
        raise EvalDomainError(f"non-finite value at {dict(zip(variables, args))}")
    return out


def vectorize(exprs, variables):
    """Return ``fn(*arrays) -> ndarray`` of shape ``(len(exprs),) + broadcast shape``.

    Non-finite results are passed through; callers decide what they mean.
    """
    exprs = tuple(exprs)
    variables = tuple(variables)
    fn = compile_exprs(exprs, variables, "numpy")

    def run(*arrays):
        arrays = [np.asarray(a, dtype=float) for a in arrays]
        shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
        with np.errstate(all="ignore"):
            values = fn(*arrays)
        out = np.empty((len(exprs),) + shape)
        for i, v in enumerate(values):
            out[i] = v
        return out

    return run


def evaluate_mp(e, binding, dps: int = 50):
    """High-precision evaluation with mpmath (oracle use)."""
    variables = tuple(sorted(e.free_vars))
    fn = compile_exprs((e,), variables, "mpmath")
    with mpmath.workdps(dps):
        return fn(*[mpmath.mpf(binding[v]) for v in variables])[0]
