"""Back-substitution verifier with symbolic and numeric certification."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import List, Optional

from .expr import (
    Expr,
    arb_functions,
    differentiate,
    free_symbols,
    normalize,
    substitute,
)
from .nf import (
    EvalError,
    NONZERO_TOL,
    Point,
    ZERO_TOL,
    ZeroState,
    eval_at,
    is_zero,
)
from .system import PdeSystem

HOLDS = "holds"
HOLDS_NUMERICALLY = "holds_numerically"
FAILS = "fails"


@dataclass
class VerifyReport:
    per_equation: List[str]
    max_residual: Optional[float]
    trials: int
    seed: int
    overall: str
    notes: List[str] = field(default_factory=list)


def residuals(sys: PdeSystem, solution: Expr) -> List[Expr]:
    """Substitute the solution into every equation, derivatives included."""
    subs = {sys.unknown.name: solution}
    for p, v in zip(sys.p_syms, sys.indep_vars):
        subs[p.name] = differentiate(solution, v)
    return [normalize(substitute(eq, subs)) for eq in sys.equations]


def solution_q(
    sys: PdeSystem,
    solution: Expr,
    trials: int = 20,
    seed: int = 0,
) -> VerifyReport:
    """Certify a candidate solution of the system.

    Exact zero residuals give ``holds``; residuals that are only
    probabilistically zero are re-sampled at ``trials`` points with the
    arbitrary functions instantiated as seeded random polynomials, and the
    maximum absolute value decides between ``holds_numerically`` and
    ``fails``.
    """
    res = residuals(sys, solution)
    verdicts = [is_zero(r, seed) for r in res]
    labels = [v.value for v in verdicts]
    if all(v is ZeroState.ZERO for v in verdicts):
        return VerifyReport(labels, 0.0, 0, seed, HOLDS)
    if any(v is ZeroState.NONZERO for v in verdicts):
        return VerifyReport(labels, None, 0, seed, FAILS, ["exact nonzero residual"])
    max_abs = 0.0
    notes: List[str] = []
    names = set()
    fns: dict = {}
    for r in res:
        names |= free_symbols(r)
        fns.update(arb_functions(r))
    done = 0
    attempts = 0
    i = 0
    while done < trials:
        attempts += 1
        if attempts > trials + 80:
            notes.append("sampling kept hitting singular points")
            return VerifyReport(labels, None, done, seed, FAILS, notes)
        rng = random.Random(f"verify:{seed}:{i}")
        i += 1
        pt = Point.generate(names, fns, rng)
        try:
            vals = [abs(float(eval_at(r, pt))) for r in res]
        except EvalError:
            continue
        max_abs = max(max_abs, max(vals, default=0.0))
        done += 1
    if max_abs < ZERO_TOL:
        overall = HOLDS_NUMERICALLY
    else:
        overall = FAILS
        if max_abs < NONZERO_TOL:
            notes.append("residual in the inconclusive band; reported as failure")
    return VerifyReport(labels, max_abs, trials, seed, overall)
