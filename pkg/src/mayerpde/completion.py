"""Four-way bracket classification and the completion loop.

Every pairwise bracket restricted to the system is classified as zero, as an
obstruction free of derivatives (the system is then inconsistent), or as a
new equation to prepend.  The loop re-runs until all brackets vanish, the
equation count exceeds the number of independent variables, or the round
budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from .bracket import restricted_brackets
from .config import SolveConfig
from .expr import Expr, add, mul, normalize, num
from .lang import PrintContext, render
from .nf import (
    Universe,
    ZeroState,
    equation_numerator,
    is_zero,
    sample_values,
    to_nf,
)
from .poly import Poly, poly_gcd, poly_sqrt
from .system import PdeSystem, solve_for_derivatives


class BracketClass(Enum):
    ZERO = "zero"
    OBSTRUCTION_XZ = "obstruction"
    NEW_EQUATION = "new"


COMPATIBLE = "compatible"
INCOMPATIBLE = "incompatible"
UNSUPPORTED = "unsupported"


@dataclass
class CompatReport:
    verdict: str
    completed: PdeSystem
    added: List[Expr] = field(default_factory=list)
    rounds: int = 0
    trace: List[str] = field(default_factory=list)
    probabilistic: bool = False
    witness: Optional[Expr] = None


def classify_bracket(b: Expr, sys: PdeSystem, seed: int = 0):
    """(classification, was-the-zero-test probabilistic)"""
    from .system import contains_derivative

    z = is_zero(b, seed)
    if z in (ZeroState.ZERO, ZeroState.PROBABLY_ZERO):
        return BracketClass.ZERO, z is ZeroState.PROBABLY_ZERO
    if not contains_derivative(b, sys):
        return BracketClass.OBSTRUCTION_XZ, z is ZeroState.PROBABLY_NONZERO
    return BracketClass.NEW_EQUATION, z is ZeroState.PROBABLY_NONZERO


def _keep_names(sys: PdeSystem):
    return tuple(p.name for p in sys.p_syms) + (sys.unknown.name,)


def _proportional(a: Expr, b: Expr) -> bool:
    """True when a and b are rational multiples of one another."""
    uni = Universe.of(a, b)
    try:
        na, da = to_nf(a, uni)
        nb, db = to_nf(b, uni)
    except Exception:
        return False
    p = na * db
    q = nb * da
    if p.is_zero or q.is_zero:
        return p.is_zero and q.is_zero
    _, cp = p.leading()
    _, cq = q.leading()
    return p.scale(cq) == q.scale(cp)


def _dedup(new: List[Expr], existing: List[Expr]) -> List[Expr]:
    out: List[Expr] = []
    for e in new:
        pool = list(existing) + out
        if any(e == x for x in pool):
            continue
        if any(_proportional(e, x) for x in pool):
            continue
        out.append(e)
    return out


def quadratic_split(eq: Expr, sys: PdeSystem) -> Optional[List[Expr]]:
    """Factor an equation quadratic in one derivative symbol whose
    discriminant is a perfect square; used when a bracket residual is a
    product of simpler constraints."""
    uni = Universe.of(eq)
    try:
        n, _ = to_nf(eq, uni)
    except Exception:
        return None
    for p in sys.p_syms:
        idx = uni.index.get(p.name)
        if idx is None:
            continue
        coeffs = n.coeffs_in(idx)
        if set(coeffs) != {0, 1, 2} and set(coeffs) != {0, 2} and set(coeffs) != {1, 2}:
            continue
        a = coeffs.get(2)
        if a is None:
            continue
        b = coeffs.get(1, Poly.const(0, uni.size))
        c = coeffs.get(0, Poly.const(0, uni.size))
        disc = b * b - a * c.scale(4)
        s = poly_sqrt(disc)
        if s is None:
            continue
        pvar = Poly.variable(idx, uni.size)
        f1 = a * pvar.scale(2) + b - s
        f2 = a * pvar.scale(2) + b + s
        if f1.is_zero or f2.is_zero:
            continue
        from .nf import nf_to_expr

        arms = []
        for f in (f1, f2):
            e, _ = equation_numerator(nf_to_expr(f, uni), keep=_keep_names(sys))
            arms.append(e)
        if any(a2 == eq for a2 in arms):
            return None
        return arms
    return None


def complete(sys: PdeSystem, config: Optional[SolveConfig] = None, _depth: int = 0) -> CompatReport:
    """Bour-Mayer completion: prepend nonvanishing derivative-dependent
    brackets until every restricted bracket vanishes or an obstruction or
    the equation-count bound is hit."""
    config = config or SolveConfig()
    max_rounds = config.max_rounds or sys.n
    trace: List[str] = list(sys.notes)
    added_total: List[Expr] = []
    probabilistic = False
    current = sys
    pctx = PrintContext.for_system(sys.unknown.name, [v.name for v in sys.indep_vars])

    for rnd in range(1, max_rounds + 1):
        config.deadline.check()
        solved = solve_for_derivatives(current)
        if solved is None:
            trace.append(f"round {rnd}: system not solvable for derivative symbols")
            return CompatReport(UNSUPPORTED, current, added_total, rnd, trace, probabilistic)
        brackets = restricted_brackets(current, solved)
        new_eqs: List[Expr] = []
        for bv in brackets:
            config.deadline.check()
            cls, prob = classify_bracket(bv.restricted, current, config.seed)
            probabilistic = probabilistic or prob
            if cls is BracketClass.ZERO:
                continue
            if cls is BracketClass.OBSTRUCTION_XZ:
                witness = bv.restricted
                trace.append(
                    f"round {rnd}: bracket of equations {bv.pair[0] + 1},{bv.pair[1] + 1} "
                    f"is a nonzero obstruction {render(witness, pctx)}"
                )
                _certify_witness(witness, trace, config.seed)
                return CompatReport(
                    INCOMPATIBLE, current, added_total, rnd, trace, probabilistic, witness
                )
            reduced, notes = equation_numerator(bv.restricted, keep=_keep_names(current), seed=config.seed)
            trace.extend(f"round {rnd}: {n}" for n in notes)
            if is_zero(reduced, config.seed) in (ZeroState.ZERO, ZeroState.PROBABLY_ZERO):
                continue
            trace.append(
                f"round {rnd}: bracket of equations {bv.pair[0] + 1},{bv.pair[1] + 1} "
                f"adds {render(reduced, pctx)}"
            )
            new_eqs.append(reduced)
        if not new_eqs:
            trace.append(f"round {rnd}: all brackets vanish; system is compatible")
            return CompatReport(COMPATIBLE, current, added_total, rnd, trace, probabilistic)
        new_eqs = _dedup(new_eqs, list(current.equations))
        if not new_eqs:
            trace.append(f"round {rnd}: nonzero brackets all reduce to existing equations")
            return CompatReport(UNSUPPORTED, current, added_total, rnd, trace, probabilistic)
        if len(current.equations) + len(new_eqs) > current.n:
            # the implemented method's overdetermination cutoff; in principle
            # such a system could still be consistent
            trace.append(
                f"round {rnd}: equation count {len(current.equations)} + {len(new_eqs)} "
                f"would exceed the variable count {current.n}; reported incompatible"
            )
            return CompatReport(
                INCOMPATIBLE, current, added_total, rnd, trace, probabilistic
            )
        if len(new_eqs) == 1 and _depth < 2:
            arms = quadratic_split(new_eqs[0], current)
            if arms:
                trace.append(
                    f"round {rnd}: added equation factors; trying branches "
                    + " | ".join(render(a, pctx) for a in arms)
                )
                reports = []
                for arm in arms:
                    config.deadline.check()
                    branch = current.with_equations((arm,) + current.equations)
                    rep = complete(branch, config, _depth + 1)
                    if rep.verdict == COMPATIBLE:
                        rep.trace = trace + [f"branch {render(arm, pctx)} succeeded"] + rep.trace
                        rep.added = added_total + [arm] + rep.added
                        rep.rounds += rnd
                        rep.probabilistic = rep.probabilistic or probabilistic
                        return rep
                    reports.append(rep)
                if all(r.verdict == INCOMPATIBLE for r in reports):
                    trace.append(f"round {rnd}: every factor branch is incompatible")
                    return CompatReport(
                        INCOMPATIBLE, current, added_total, rnd, trace, probabilistic
                    )
                trace.append(f"round {rnd}: factor branches inconclusive")
                return CompatReport(UNSUPPORTED, current, added_total, rnd, trace, probabilistic)
        current = current.with_equations(tuple(new_eqs) + current.equations)
        added_total.extend(new_eqs)
    trace.append(f"no fixpoint after {max_rounds} completion rounds")
    return CompatReport(UNSUPPORTED, current, added_total, max_rounds, trace, probabilistic)


def _certify_witness(witness: Expr, trace: List[str], seed: int):
    try:
        values = sample_values(witness, seed, count=3)
        mags = ", ".join(f"{abs(float(v)):.3g}" for v in values)
        trace.append(f"witness magnitudes at sampled points: {mags}")
    except Exception:
        trace.append("witness could not be evaluated numerically")
