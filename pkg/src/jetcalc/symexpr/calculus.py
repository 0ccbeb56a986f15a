"""Simplification and exact partial differentiation."""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

from .nodes import ONE, ZERO, Add, Const, Div, Expr, Func, Mul, Neg, Pow, Sub, Var

# products of sums are distributed only while the result stays this small
EXPAND_LIMIT = 64
_MAX_EXPAND_POWER = 4

_EXACT_FOLDS = {
    ("sin", 0): 0,
    ("cos", 0): 1,
    ("exp", 0): 1,
    ("log", 1): 0,
    ("sqrt", 0): 0,
    ("sqrt", 1): 1,
}


def _num(value):
    # keep floats that hold an integer exact
    if isinstance(value, float) and value.is_integer() and abs(value) < 2**53:
        return Fraction(int(value))
    return value


def _sort_key(e: Expr):
    return (isinstance(e, Const), str(e))


def _split_coef(e: Expr):
    """Split a canonical term into (numeric coefficient, rest or None)."""
    if isinstance(e, Const):
        return e.value, None
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        rest = e.factors[1:]
        return e.factors[0].value, rest[0] if len(rest) == 1 else Mul(rest)
    return Fraction(1), e


def _with_coef(coef, rest: Expr) -> Expr:
    if coef == 1:
        return rest
    factors = rest.factors if isinstance(rest, Mul) else (rest,)
    return Mul((Const(coef),) + factors)


def _terms(e):
    return e.terms if isinstance(e, Add) else (e,)


def _add(items) -> Expr:
    const = Fraction(0)
    coefs: dict = {}
    for item in items:
        for t in _terms(item):
            c, rest = _split_coef(t)
            if rest is None:
                const = const + c
            else:
                coefs[rest] = coefs.get(rest, Fraction(0)) + c
    terms = [_with_coef(_num(c), r) for r, c in coefs.items() if c != 0]
    terms.sort(key=_sort_key)
    const = _num(const)
    if const != 0:
        terms.append(Const(const))
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    return Add(terms)


def _make_pow(base, n):
    return base if n == 1 else Pow(base, n)


def _mul(items) -> Expr:
    coef = Fraction(1)
    powers: dict = {}
    for item in items:
        for f in item.factors if isinstance(item, Mul) else (item,):
            if isinstance(f, Const):
                coef = coef * f.value
            elif isinstance(f, Pow):
                powers[f.base] = powers.get(f.base, 0) + f.exp
            else:
                powers[f] = powers.get(f, 0) + 1
    coef = _num(coef)
    if coef == 0:
        return ZERO
    factors = []
    for base, n in powers.items():
        if n == 0:
            continue
        if n > 1 and isinstance(base, Add):
            expanded = _expand_power(base, n)
            if expanded is not None:
                factors.append(expanded)
                continue
        factors.append(_make_pow(base, n))
    sums = [f for f in factors if isinstance(f, Add)]
    if sums:
        size = 1
        for s in sums:
            size *= len(s.terms)
        if size <= EXPAND_LIMIT:
            first = sums[0]
            others = [f for f in factors if f is not first]
            return _add(_mul([Const(coef), *others, t]) for t in first.terms)
    factors.sort(key=_sort_key)
    if not factors:
        return Const(coef)
    if coef == 1 and len(factors) == 1:
        return factors[0]
    if coef == 1:
        return Mul(factors)
    return Mul([Const(coef)] + factors)


def _expand_power(base: Add, n: int):
    if n > _MAX_EXPAND_POWER or len(base.terms) ** n > EXPAND_LIMIT:
        return None
    acc = base
    for _ in range(n - 1):
        acc = _add(_mul([s, t]) for s in _terms(acc) for t in base.terms)
    return acc


def _pow(base: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return base
    if isinstance(base, Const):
        if base.value == 0 and n < 0:
            return Pow(base, n)
        try:
            return Const(_num(base.value**n))
        except (OverflowError, ZeroDivisionError):
            return Pow(base, n)
    if isinstance(base, Pow):
        return _pow(base.base, base.exp * n)
    if isinstance(base, Mul):
        return _mul([_pow(f, n) for f in base.factors])
    return _mul([Pow(base, n)])


def _func(name: str, arg: Expr) -> Expr:
    if isinstance(arg, Const):
        v = arg.value
        exact = _EXACT_FOLDS.get((name, v)) if v in (0, 1) else None
        if exact is not None:
            return Const(exact)
        try:
            folded = getattr(math, name)(float(v))
        except (ValueError, OverflowError):
            return Func(name, arg)
        if math.isfinite(folded):
            return Const(_num(folded))
    return Func(name, arg)


@lru_cache(maxsize=200_000)
def simplify(e: Expr) -> Expr:
    """Normalize ``e``; the result evaluates equal to ``e`` wherever both are defined.

    Sums are flattened with like terms collected, products are flattened with
    equal bases merged into integer powers, constants are folded and small
    products of sums are distributed.  ``Sub``, ``Neg`` and ``Div`` never
    survive: they become coefficient ``-1`` and powers ``^-1``.
    """
    if isinstance(e, (Const, Var)):
        if isinstance(e, Const):
            return Const(_num(e.value))
        return e
    if isinstance(e, Add):
        return _add(simplify(t) for t in e.terms)
    if isinstance(e, Sub):
        return _add([simplify(e.left), _mul([Const(-1), simplify(e.right)])])
    if isinstance(e, Neg):
        return _mul([Const(-1), simplify(e.arg)])
    if isinstance(e, Mul):
        return _mul([simplify(f) for f in e.factors])
    if isinstance(e, Div):
        return _mul([simplify(e.num), _pow(simplify(e.den), -1)])
    if isinstance(e, Pow):
        return _pow(simplify(e.base), e.exp)
    if isinstance(e, Func):
        return _func(e.name, simplify(e.arg))
    raise TypeError(f"not an expression: {e!r}")


def _d(e: Expr, v: str) -> Expr:
    if v not in e.free_vars:
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Add):
        return Add([_d(t, v) for t in e.terms])
    if isinstance(e, Sub):
        return Sub(_d(e.left, v), _d(e.right, v))
    if isinstance(e, Neg):
        return Neg(_d(e.arg, v))
    if isinstance(e, Mul):
        parts = []
        for i, f in enumerate(e.factors):
            if v in f.free_vars:
                parts.append(Mul(e.factors[:i] + (_d(f, v),) + e.factors[i + 1 :]))
        return parts[0] if len(parts) == 1 else Add(parts)
    if isinstance(e, Div):
        return Sub(
            Div(_d(e.num, v), e.den),
            Div(Mul((e.num, _d(e.den, v))), Pow(e.den, 2)),
        )
    if isinstance(e, Pow):
        return Mul((Const(e.exp), Pow(e.base, e.exp - 1), _d(e.base, v)))
    if isinstance(e, Func):
        u, du = e.arg, _d(e.arg, v)
        if e.name == "sin":
            outer = Func("cos", u)
        elif e.name == "cos":
            outer = Neg(Func("sin", u))
        elif e.name == "exp":
            outer = e
        elif e.name == "log":
            outer = Pow(u, -1)
        else:
            outer = Div(ONE, Mul((Const(2), e)))
        return Mul((outer, du))
    raise TypeError(f"not an expression: {e!r}")


@lru_cache(maxsize=200_000)
def diff(e: Expr, v: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to the variable ``v``, simplified."""
    return simplify(_d(e, v))
