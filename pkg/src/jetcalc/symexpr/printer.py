"""Text form of expressions, readable back by :func:`parse`."""

from fractions import Fraction

from .nodes import Add, Const, Div, Func, Mul, Neg, Pow, Sub, Var

# binding strength of the printed form
_SUM, _PRODUCT, _UNARY, _POWER, _ATOM = 1, 2, 3, 4, 5


def _const_text(value) -> str:
    if isinstance(value, Fraction):
        if value.denominator == 1:
            s = str(value.numerator)
        else:
            s = f"({value.numerator}/{value.denominator})"
    else:
        s = repr(float(value))
    if s.startswith("-"):
        s = f"({s})"
    return s


def _is_negative_term(e) -> bool:
    if isinstance(e, Const):
        return e.value < 0
    if isinstance(e, Neg):
        return True
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        return e.factors[0].value < 0
    return False


def _negated(e):
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Neg):
        return e.arg
    coef = -e.factors[0].value
    rest = e.factors[1:]
    if coef == 1:
        return rest[0] if len(rest) == 1 else Mul(rest)
    return Mul((Const(coef),) + rest)


def _render(e):
    """Return (text, binding strength)."""
    if isinstance(e, Const):
        return _const_text(e.value), _ATOM
    if isinstance(e, Var):
        return e.name, _ATOM
    if isinstance(e, Func):
        return f"{e.name}({_render(e.arg)[0]})", _ATOM
    if isinstance(e, Add):
        parts = [_wrap(e.terms[0], _SUM)]
        for t in e.terms[1:]:
            if _is_negative_term(t):
                parts.append(" - " + _wrap(_negated(t), _PRODUCT))
            else:
                parts.append(" + " + _wrap(t, _SUM))
        return "".join(parts), _SUM
    if isinstance(e, Sub):
        return f"{_wrap(e.left, _SUM)} - {_wrap(e.right, _PRODUCT)}", _SUM
    if isinstance(e, Mul):
        lead = e.factors[0]
        if isinstance(lead, Const) and lead.value < 0:
            return f"-({_render(_negated(e))[0]})", _UNARY
        return "*".join(_wrap(f, _PRODUCT) for f in e.factors), _PRODUCT
    if isinstance(e, Div):
        return f"{_wrap(e.num, _PRODUCT)}/{_wrap(e.den, _UNARY)}", _PRODUCT
    if isinstance(e, Neg):
        return f"-({_render(e.arg)[0]})", _UNARY
    if isinstance(e, Pow):
        if e.exp >= 0:
            return f"{_wrap(e.base, _ATOM)}^{e.exp}", _POWER
        if e.exp == -1:
            return f"(1/{_wrap(e.base, _ATOM)})", _ATOM
        return f"(1/{_wrap(e.base, _ATOM)}^{-e.exp})", _ATOM
    raise TypeError(f"not an expression: {e!r}")


def _wrap(e, strength):
    text, own = _render(e)
    return f"({text})" if own < strength else text


def to_text(e) -> str:
    return _render(e)[0]
