"""Symbolic compatibility analysis and closed-form solution of
overdetermined systems of first-order PDEs in one unknown function."""

from .expr import (
    Expr,
    ExprError,
    EvalError,
    FnRule,
    add,
    appfn,
    call,
    differentiate,
    fnderiv,
    mul,
    normalize,
    num,
    power,
    sqrt,
    substitute,
    sym,
    syms,
)
from .nf import Point, RationalNF, ZeroState, eval_at, is_zero, to_rational_nf
from .lang import ParseContext, ParseError, parse_expr, render

__all__ = [
    "Expr",
    "ExprError",
    "EvalError",
    "FnRule",
    "ParseContext",
    "ParseError",
    "Point",
    "RationalNF",
    "ZeroState",
    "add",
    "appfn",
    "call",
    "differentiate",
    "eval_at",
    "fnderiv",
    "is_zero",
    "mul",
    "normalize",
    "num",
    "parse_expr",
    "power",
    "render",
    "sqrt",
    "substitute",
    "sym",
    "syms",
    "to_rational_nf",
]
