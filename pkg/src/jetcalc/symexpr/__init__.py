"""Symbolic scalar expressions: parse, differentiate, simplify, evaluate, zero-test."""

from .calculus import diff, simplify
from .evaluate import EvalDomainError, evaluate, evaluate_many, evaluate_mp, vectorize
from .nodes import (
    FUNCTIONS,
    ONE,
    ZERO,
    Add,
    Const,
    Div,
    Expr,
    Func,
    Mul,
    Neg,
    Pow,
    Sub,
    Var,
    as_expr,
    cos,
    exp,
    log,
    sin,
    sqrt,
)
from .parser import ExprSyntaxError, UnknownVariable, parse
from .printer import to_text
from .zero import ZeroKind, ZeroVerdict, equivalent, is_zero

__all__ = [
    "FUNCTIONS", "ONE", "ZERO", "Add", "Const", "Div", "EvalDomainError", "Expr",
    "ExprSyntaxError", "Func", "Mul", "Neg", "Pow", "Sub", "UnknownVariable", "Var",
    "ZeroKind", "ZeroVerdict", "as_expr", "cos", "diff", "equivalent", "evaluate",
    "evaluate_many", "evaluate_mp", "exp", "is_zero", "log", "parse", "simplify",
    "sin", "sqrt", "to_text", "vectorize",
]
