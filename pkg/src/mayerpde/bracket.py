"""Jacobi bracket of two equations and pairwise brackets restricted to a
system.

The bracket uses total derivatives along each independent variable,
``D_k = d/dx_k + p_k * d/dz``, so equations that mention the undifferentiated
unknown are handled correctly; for z-free arguments it reduces to the
classical Poisson bracket in (x, p).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

from .expr import Expr, add, differentiate, mul, normalize, num, substitute
from .system import DerivSolve, PdeSystem, solve_for_derivatives


def total_derivative(e: Expr, sys: PdeSystem, k: int) -> Expr:
    xk = sys.indep_vars[k]
    pk = sys.p_syms[k]
    return add(differentiate(e, xk), mul(pk, differentiate(e, sys.unknown)))


def jacobi_bracket(f: Expr, g: Expr, sys: PdeSystem) -> Expr:
    """sum_k D_k(f) dg/dp_k - D_k(g) df/dp_k, canonicalized."""
    parts = []
    for k in range(sys.n):
        pk = sys.p_syms[k]
        gp = differentiate(g, pk)
        fp = differentiate(f, pk)
        if gp != num(0):
            parts.append(mul(total_derivative(f, sys, k), gp))
        if fp != num(0):
            parts.append(mul(num(-1), total_derivative(g, sys, k), fp))
    return normalize(add(*parts))


@dataclass
class BracketValue:
    pair: tuple  # (i, j) with i < j, zero-based equation indices
    raw: Expr
    restricted: Expr


def restricted_brackets(sys: PdeSystem, solved: Optional[DerivSolve] = None) -> Optional[List[BracketValue]]:
    """All pairwise brackets with the solved derivatives substituted in.

    Absent when the system cannot be solved for pivot derivatives; a
    single-equation system yields the empty list.
    """
    if solved is None:
        solved = solve_for_derivatives(sys)
    if solved is None:
        return None
    out = []
    eqs = sys.equations
    for j in range(len(eqs)):
        for i in range(j):
            raw = jacobi_bracket(eqs[i], eqs[j], sys)
            restricted = normalize(substitute(raw, solved.pivots))
            out.append(BracketValue((i, j), raw, restricted))
    return out
