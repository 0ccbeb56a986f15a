"""Immutable expression tree over named coordinates."""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class Expr:
    """Base class of all expression nodes.

    Nodes are immutable and hash/compare structurally.  Arithmetic operators
    build raw (unsimplified) trees; call :func:`jetcalc.symexpr.simplify` to
    normalize.
    """

    __slots__ = ("_hash", "_text", "_free")

    def _init_cache(self, key):
        object.__setattr__(self, "_hash", hash((type(self).__name__,) + key))
        object.__setattr__(self, "_text", None)
        object.__setattr__(self, "_free", None)

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def _key(self):  # pragma: no cover - abstract
        raise NotImplementedError

    def children(self) -> tuple["Expr", ...]:
        return ()

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._key() == other._key()

    def __ne__(self, other):
        return not self == other

    @property
    def free_vars(self) -> frozenset:
        if self._free is None:
            acc = frozenset()
            for c in self.children():
                acc |= c.free_vars
            object.__setattr__(self, "_free", acc)
        return self._free

    def __str__(self):
        if self._text is None:
            from .printer import to_text

            object.__setattr__(self, "_text", to_text(self))
        return self._text

    def __repr__(self):
        return f"{type(self).__name__}({str(self)!r})"

    # raw tree builders
    def __add__(self, other):
        return Add((self, as_expr(other)))

    def __radd__(self, other):
        return Add((as_expr(other), self))

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul((self, as_expr(other)))

    def __rmul__(self, other):
        return Mul((as_expr(other), self))

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __pow__(self, n):
        return Pow(self, n)

    def __neg__(self):
        return Neg(self)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        if isinstance(value, bool):
            raise TypeError("booleans are not constants")
        if isinstance(value, Rational):
            value = Fraction(value)
        elif isinstance(value, float):
            pass
        else:
            raise TypeError(f"unsupported constant {value!r}")
        object.__setattr__(self, "value", value)
        self._init_cache((value,))

    def _key(self):
        return (self.value,)

    @property
    def free_vars(self):
        return frozenset()


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)
        self._init_cache((name,))

    def _key(self):
        return (self.name,)

    @property
    def free_vars(self):
        return frozenset((self.name,))


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms):
        terms = tuple(terms)
        if len(terms) < 2:
            raise ValueError("Add needs at least two terms")
        object.__setattr__(self, "terms", terms)
        self._init_cache(terms)

    def _key(self):
        return self.terms

    def children(self):
        return self.terms


class Sub(Expr):
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        self._init_cache((left, right))

    def _key(self):
        return (self.left, self.right)

    def children(self):
        return (self.left, self.right)


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors):
        factors = tuple(factors)
        if len(factors) < 2:
            raise ValueError("Mul needs at least two factors")
        object.__setattr__(self, "factors", factors)
        self._init_cache(factors)

    def _key(self):
        return self.factors

    def children(self):
        return self.factors


class Div(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num, den):
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        self._init_cache((num, den))

    def _key(self):
        return (self.num, self.den)

    def children(self):
        return (self.num, self.den)


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg):
        object.__setattr__(self, "arg", arg)
        self._init_cache((arg,))

    def _key(self):
        return (self.arg,)

    def children(self):
        return (self.arg,)


class Pow(Expr):
    """Integer power.  Non-integer powers go through ``exp(p*log(b))``."""

    __slots__ = ("base", "exp")

    def __init__(self, base, exp):
        if isinstance(exp, bool) or not isinstance(exp, int):
            raise TypeError("Pow exponent must be a literal integer")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exp", exp)
        self._init_cache((base, exp))

    def _key(self):
        return (self.base, self.exp)

    def children(self):
        return (self.base,)


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name, arg):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "arg", arg)
        self._init_cache((name, arg))

    def _key(self):
        return (self.name, self.arg)

    def children(self):
        return (self.arg,)


ZERO = Const(0)
ONE = Const(1)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(value)


def sin(e):
    return Func("sin", as_expr(e))


def cos(e):
    return Func("cos", as_expr(e))


def exp(e):
    return Func("exp", as_expr(e))


def log(e):
    return Func("log", as_expr(e))


def sqrt(e):
    return Func("sqrt", as_expr(e))
