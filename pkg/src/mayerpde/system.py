"""System model: independent variables, one unknown, derivative symbols,
Jacobian nondegeneracy, and solving the equations for pivot derivatives."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

from .expr import (
    Expr,
    ExprError,
    FnDeriv,
    Sym,
    add,
    differentiate,
    free_symbols,
    has_symbol,
    mul,
    node_count,
    normalize,
    num,
    power,
    substitute,
)
from .lang import p_symbol
from .linalg import float_rank, fraction_rank
from .nf import Point, ZeroState, eval_at, is_zero, is_zeroish, to_rational_nf
from .expr import EvalError, arb_functions


class SystemError(ExprError):
    pass


@dataclass(frozen=True)
class PdeSystem:
    """First-order system F_i(x, z, p) = 0 for a single unknown z(x).

    ``p_syms[i]`` is the reserved symbol standing for dz/dx_i.
    """

    indep_vars: Tuple[Sym, ...]
    unknown: Sym
    params: Tuple[Sym, ...]
    equations: Tuple[Expr, ...]
    p_syms: Tuple[Sym, ...]
    notes: Tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.indep_vars)

    @property
    def m(self) -> int:
        return len(self.equations)

    def p_of(self, var: Sym) -> Sym:
        return self.p_syms[[v.name for v in self.indep_vars].index(var.name)]

    def with_equations(self, equations) -> "PdeSystem":
        return PdeSystem(
            self.indep_vars, self.unknown, self.params, tuple(equations), self.p_syms, self.notes
        )


def make_system(indep_vars, unknown: Sym, params, equations) -> PdeSystem:
    """Validate and canonicalize a system; duplicates and zero rows drop here."""
    indep_vars = tuple(indep_vars)
    params = tuple(params)
    if len(indep_vars) < 2:
        raise SystemError("at least two independent variables are required")
    names = [v.name for v in indep_vars] + [unknown.name] + [p.name for p in params]
    if len(set(names)) != len(names):
        raise SystemError("variable, unknown and parameter names must be distinct")
    p_syms = tuple(p_symbol(unknown.name, v.name) for v in indep_vars)
    notes = []
    kept: List[Expr] = []
    for i, eq in enumerate(equations):
        e = normalize(eq)
        if is_zeroish(e):
            notes.append(f"dropped identically zero equation {i + 1}")
            continue
        if any(e == k for k in kept):
            notes.append(f"dropped duplicate equation {i + 1}")
            continue
        kept.append(e)
    if not kept:
        raise SystemError("no nontrivial equations")
    return PdeSystem(indep_vars, unknown, params, tuple(kept), p_syms, tuple(notes))


def contains_derivative(e: Expr, sys: PdeSystem) -> bool:
    """True when any dz/dx_i symbol or slot derivative of the unknown occurs."""
    free = free_symbols(e)
    if any(p.name in free for p in sys.p_syms):
        return True

    def walk(x: Expr) -> bool:
        if isinstance(x, FnDeriv) and x.fn == sys.unknown.name:
            return True
        from .expr import children

        return any(walk(c) for c in children(x))

    return walk(e)


def jacobian_rank(sys: PdeSystem, seed: int = 0) -> int:
    """Rank of [dF_i/dp_j]: exact over the rational-function field when the
    entries are rational, otherwise the maximum over three sampled points."""
    matrix = [[differentiate(eq, p) for p in sys.p_syms] for eq in sys.equations]
    flat = [e for row in matrix for e in row]
    if all(to_rational_nf(e) is not None for e in flat):
        return _exact_rank(matrix)
    best = 0
    names = set()
    fns: dict = {}
    for e in flat:
        names |= free_symbols(e)
        fns.update(arb_functions(e))
    for t in range(3):
        for attempt in range(24):
            rng = random.Random(f"rank:{seed}:{t}:{attempt}")
            pt = Point.generate(names, fns, rng)
            try:
                rows = [[float(eval_at(e, pt)) for e in row] for row in matrix]
            except EvalError:
                continue
            best = max(best, float_rank(rows))
            break
    return best


def _exact_rank(matrix) -> int:
    rows = [list(r) for r in matrix]
    rank = 0
    cols = list(range(len(rows[0]) if rows else 0))
    col_at = 0
    while rows and col_at < len(cols):
        piv = None
        for i, r in enumerate(rows):
            if is_zero(r[col_at]) not in (ZeroState.ZERO, ZeroState.PROBABLY_ZERO):
                piv = i
                break
        if piv is None:
            col_at += 1
            continue
        prow = rows.pop(piv)
        pc = prow[col_at]
        new_rows = []
        for r in rows:
            c = r[col_at]
            if is_zero(c) in (ZeroState.ZERO, ZeroState.PROBABLY_ZERO):
                new_rows.append(r)
                continue
            f = normalize(mul(c, power(pc, num(-1))))
            new_rows.append(
                [normalize(add(a, mul(num(-1), f, b))) for a, b in zip(r, prow)]
            )
        rows = new_rows
        rank += 1
        col_at += 1
    return rank


@dataclass
class DerivSolve:
    """Derivative symbols solved from the system by sequential pivoting."""

    pivots: dict  # p-symbol name -> Expr free of every pivot symbol
    free: List[Sym]
    trace: List[str] = field(default_factory=list)


def solve_for_derivatives(sys: PdeSystem) -> Optional[DerivSolve]:
    """Pick, per equation, a derivative it is affine in; isolate; substitute.

    Handles quasilinear systems and simple nonlinear ones where each
    equation is affine in some not-yet-solved derivative (the coefficient
    may contain other derivatives).  Returns None when an equation never
    becomes affine in an unsolved derivative.
    """
    pivots: dict = {}
    order: List[str] = []
    trace: List[str] = []
    remaining = [normalize(eq) for eq in sys.equations]
    unsolved_p = {p.name: p for p in sys.p_syms}
    for idx, eq in enumerate(remaining):
        eq = normalize(substitute(eq, pivots))
        if is_zeroish(eq):
            trace.append(f"equation {idx + 1} became trivial during pivoting")
            continue
        best = None
        for p in unsolved_p.values():
            c = differentiate(eq, p)
            if has_symbol(c, p.name):
                continue  # not affine in this derivative
            if is_zero(c) in (ZeroState.ZERO, ZeroState.PROBABLY_ZERO):
                continue
            score = (node_count(c), sys.p_syms.index(p))
            if best is None or score < best[0]:
                best = (score, p, c)
        if best is None:
            return None
        _, p, c = best
        rest = substitute(eq, {p.name: num(0)})
        rhs = normalize(mul(num(-1), rest, power(c, num(-1))))
        pivots[p.name] = rhs
        order.append(p.name)
        del unsolved_p[p.name]
        trace.append(f"solved equation {idx + 1} for {p.name}")
    # make every right-hand side free of all pivot symbols
    for name in reversed(order):
        others = {k: v for k, v in pivots.items() if k != name}
        pivots[name] = normalize(substitute(pivots[name], others))
    for eq in sys.equations:
        if not is_zeroish(normalize(substitute(eq, pivots))):
            return None
    free = [p for p in sys.p_syms if p.name not in pivots]
    return DerivSolve(pivots, free, trace)
