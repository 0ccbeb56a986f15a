"""Recursive-descent parser for the coefficient expression language.

Grammar (whitespace insignificant)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ['-'] atom ['^' INT]
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

A leading minus binds looser than ``^``: ``-x^2`` is ``-(x^2)``.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .nodes import FUNCTIONS, Add, Const, Div, Func, Mul, Neg, Pow, Sub, Var


class ExprSyntaxError(ValueError):
    def __init__(self, text, pos, expected, found):
        self.text = text
        self.pos = pos
        self.expected = expected
        self.found = found
        super().__init__(f"at position {pos}: expected {expected}, found {found!r}")


class UnknownVariable(ValueError):
    def __init__(self, name, pos=None):
        self.name = name
        self.pos = pos
        where = "" if pos is None else f" at position {pos}"
        super().__init__(f"unknown variable {name!r}{where}")


_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(text, pos, "a number, name or operator", text[pos])
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, allowed):
        self.text = text
        self.allowed = allowed
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.peek()
        if text != value or kind == "end":
            raise ExprSyntaxError(self.text, pos, repr(value), text or "end of input")
        self.i += 1

    def parse(self):
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(self.text, pos, "operator or end of input", text)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = Add((e, rhs)) if op == "+" else Sub(e, rhs)
        return e

    def term(self):
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.factor()
            e = Mul((e, rhs)) if op == "*" else Div(e, rhs)
        return e

    def factor(self):
        negate = False
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            negate = True
        e = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            kind, text, pos = self.take()
            if kind != "number" or not text.isdigit():
                raise ExprSyntaxError(self.text, pos, "integer exponent", text or "end of input")
            e = Pow(e, int(text))
        return Neg(e) if negate else e

    def atom(self):
        kind, text, pos = self.take()
        if kind == "number":
            return Const(Fraction(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            if self.allowed is not None and text not in self.allowed:
                raise UnknownVariable(text, pos)
            return Var(text)
        if text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ExprSyntaxError(self.text, pos, "number, name or '('", text or "end of input")


def parse(text: str, allowed_vars=None):
    """Parse ``text`` into an :class:`Expr`.

    ``allowed_vars`` restricts the variable names; ``None`` accepts any name.
    """
    if allowed_vars is not None:
        allowed_vars = frozenset(allowed_vars)
        if not allowed_vars:
            raise ValueError("allowed_vars must be nonempty")
    return _Parser(text, allowed_vars).parse()
