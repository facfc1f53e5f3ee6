"""Recursive solve-substitute-rename cascade and the top-level driver.

One equation is solved at a time; its solution is substituted into the rest
(with the chain rule through the generated arbitrary function), the solution's
invariant arguments become the next level's independent variables, and the
process repeats with the generated function as the new unknown.  Equations the
single-equation solver cannot handle are parked and reported unsolved, after
one retry pass per completed level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .calculus import isolate
from .completion import COMPATIBLE, CompatReport, complete
from .config import SolveConfig, SolveTimeout
from .expr import (
    Expr,
    FnDeriv,
    FnRule,
    Sym,
    add,
    appfn,
    arb_functions,
    children,
    differentiate,
    fnderiv,
    free_symbols,
    has_symbol,
    mul,
    normalize,
    num,
    replace_nodes,
    substitute,
    sym,
)
from .lang import PrintContext, p_symbol, render
from .nf import ZeroState, equation_numerator, is_zero, is_zeroish
from .single import NameSource, SingleSolution, integrate_exact_form, solve_single_pde
from .system import PdeSystem, jacobian_rank, make_system, solve_for_derivatives

SOLVED = "solved"
PARTIAL = "partially_solved"
INCOMPATIBLE_STATUS = "incompatible"
UNSUPPORTED_STATUS = "unsupported"


@dataclass
class Level:
    variables: Tuple[Sym, ...]
    unknown: Sym
    params: Tuple[Sym, ...]
    solution: Expr
    new_fn: str
    arity: int
    invariants: Tuple[Expr, ...]
    fresh: Tuple[Sym, ...]
    forward_subs: Dict[str, Expr]
    node_map: Dict[Expr, Expr]
    inversion: Dict[str, Expr]


@dataclass
class CascadeState:
    levels: List[Level]
    unsolved: List[Expr]  # original coordinates, generated functions explicit
    counter_names: List[Tuple[str, int]]
    trace: List[str]
    probabilistic: bool = False


@dataclass
class GeneralSolution:
    solution: Optional[Expr]
    generated: List[Tuple[str, int]]
    unsolved: List[Expr]
    trace: List[str] = field(default_factory=list)
    probabilistic: bool = False


@dataclass
class SolveOutcome:
    status: str
    solution: Optional[GeneralSolution]
    completion: CompatReport
    trace: List[str] = field(default_factory=list)


def _keep_names(unknown: Sym, p_syms) -> tuple:
    return tuple(p.name for p in p_syms) + (unknown.name,)


def _reduce_equation(eq: Expr, unknown: Sym, p_syms, seed: int, trace: List[str]) -> Expr:
    reduced, notes = equation_numerator(eq, keep=_keep_names(unknown, p_syms), seed=seed)
    trace.extend(notes)
    return reduced


def pdes_to_rules(sys: PdeSystem, config: Optional[SolveConfig] = None,
                  names: Optional[NameSource] = None) -> CascadeState:
    """Run the cascade on a (completed) system; see the module docstring."""
    config = config or SolveConfig()
    if names is None:
        names = NameSource(_taken_names(sys))
    trace: List[str] = []
    levels: List[Level] = []
    parked: List[Expr] = []
    queue: List[Expr] = list(sys.equations)
    registry: List[Tuple[str, int]] = []
    probabilistic = False

    while queue:
        config.deadline.check()
        eq_orig = queue.pop(0)
        frame = _current_frame(sys, levels)
        eq = _forward_all(eq_orig, levels, frame_of=lambda k: _frame_at(sys, levels, k))
        eq = _reduce_equation(eq, frame.unknown, frame.p_syms, config.seed, trace)
        z = is_zero(eq, config.seed)
        if z in (ZeroState.ZERO, ZeroState.PROBABLY_ZERO):
            probabilistic = probabilistic or z is ZeroState.PROBABLY_ZERO
            trace.append("an equation became identically satisfied")
            continue
        if not frame.variables:
            parked.append(eq_orig)
            continue
        sol = solve_single_pde(
            eq, frame.variables, frame.unknown, frame.p_syms, frame.params, names, config
        )
        if sol is None:
            parked.append(eq_orig)
            continue
        registry.append((sol.new_fn, sol.arity))
        trace.extend(sol.notes)
        level = _build_level(frame, sol, names, trace)
        if level is None:
            # rename failure: everything still pending is reported unsolved
            levels.append(_terminal_level(frame, sol))
            trace.append(
                f"no invertible renaming for the arguments of {sol.new_fn}; "
                "remaining equations reported unsolved"
            )
            parked.extend(queue)
            queue = []
            break
        levels.append(level)
        pctx = PrintContext.for_system(frame.unknown.name, [v.name for v in frame.variables])
        trace.append(
            f"solved one equation: {frame.unknown.name} = {render(sol.expression, pctx)}"
        )
        if parked:
            trace.append(f"retrying {len(parked)} parked equation(s) at the next level")
            queue = parked + queue
            parked = []
    return CascadeState(levels, parked, registry, trace, probabilistic)


@dataclass
class _Frame:
    variables: Tuple[Sym, ...]
    unknown: Sym
    params: Tuple[Sym, ...]
    p_syms: Tuple[Sym, ...]


def _frame_at(sys: PdeSystem, levels: List[Level], k: int) -> "_Frame":
    if k == 0:
        return _Frame(sys.indep_vars, sys.unknown, sys.params, sys.p_syms)
    lvl = levels[k - 1]
    unknown = sym(lvl.new_fn)
    variables = lvl.fresh
    params = lvl.params
    return _Frame(
        variables,
        unknown,
        params,
        tuple(p_symbol(lvl.new_fn, v.name) for v in variables),
    )


def _current_frame(sys: PdeSystem, levels: List[Level]) -> "_Frame":
    return _frame_at(sys, levels, len(levels))


def _taken_names(sys: PdeSystem) -> set:
    taken = set()
    for e in sys.equations:
        taken |= free_symbols(e)
    taken |= {v.name for v in sys.indep_vars} | {sys.unknown.name}
    taken |= {p.name for p in sys.params}
    return taken


def _forward_all(eq: Expr, levels: List[Level], frame_of) -> Expr:
    for k, lvl in enumerate(levels):
        eq = substitute(eq, lvl.forward_subs)
        eq = replace_nodes(eq, lvl.node_map)
        if lvl.inversion:
            eq = substitute(eq, lvl.inversion)
        eq = normalize(eq)
    return eq


def _build_level(frame: "_Frame", sol: SingleSolution, names: NameSource, trace) -> Optional[Level]:
    forward = {p.name: normalize(differentiate(sol.expression, v))
               for p, v in zip(frame.p_syms, frame.variables)}
    forward[frame.unknown.name] = sol.expression
    if sol.arity == 0:
        return Level(
            frame.variables, frame.unknown, frame.params, sol.expression,
            sol.new_fn, 0, (), (), forward, {}, {},
        )
    fresh: List[Sym] = []
    nontrivial: List[int] = []
    for i, inv in enumerate(sol.invariants):
        if isinstance(inv, Sym) and inv in frame.variables:
            fresh.append(inv)
        else:
            fresh.append(sym(names.variable()))
            nontrivial.append(i)
    node_map: Dict[Expr, Expr] = {appfn(sol.new_fn, *sol.invariants): sym(sol.new_fn)}
    for j, u in enumerate(fresh):
        unit = tuple(1 if i == j else 0 for i in range(sol.arity))
        node_map[fnderiv(sol.new_fn, unit, *sol.invariants)] = p_symbol(sol.new_fn, u.name)
    inversion = _invert_renaming(frame, sol, fresh, nontrivial)
    if inversion is None:
        return None
    new_params = frame.params + tuple(
        v for v in frame.variables
        if v not in fresh and v.name not in inversion
    )
    return Level(
        frame.variables, frame.unknown, new_params, sol.expression,
        sol.new_fn, sol.arity, tuple(sol.invariants), tuple(fresh),
        forward, node_map, inversion,
    )


def _invert_renaming(frame, sol: SingleSolution, fresh, nontrivial) -> Optional[Dict[str, Expr]]:
    """Express a subset of the old variables through the fresh ones.

    Targets are chosen greedily, fewest occurrences across the invariants
    first; inversions are built triangularly so later ones may use earlier
    results.
    """
    if not nontrivial:
        return {}
    reused = {v.name for v in fresh if v in frame.variables}
    occurrences: Dict[str, int] = {}
    for i in nontrivial:
        for n in free_symbols(sol.invariants[i]):
            occurrences[n] = occurrences.get(n, 0) + 1
    var_names = [v.name for v in frame.variables]
    candidates = [
        n for n in occurrences
        if n in var_names and n not in reused
    ]
    candidates.sort(key=lambda n: (occurrences[n], var_names.index(n)))
    inversion: Dict[str, Expr] = {}
    used = set()
    for i in nontrivial:
        relation = normalize(
            add(substitute(sol.invariants[i], inversion), mul(num(-1), fresh[i]))
        )
        solved = None
        for n in candidates:
            if n in used or not has_symbol(relation, n):
                continue
            got = isolate(relation, sym(n))
            if got is not None:
                solved = (n, got)
                break
        if solved is None:
            return None
        n, got = solved
        used.add(n)
        # keep earlier inversions self-contained
        inversion = {k: normalize(substitute(v, {n: got})) for k, v in inversion.items()}
        inversion[n] = got
    return inversion


def _terminal_level(frame: "_Frame", sol: SingleSolution) -> Level:
    forward = {p.name: normalize(differentiate(sol.expression, v))
               for p, v in zip(frame.p_syms, frame.variables)}
    forward[frame.unknown.name] = sol.expression
    return Level(
        frame.variables, frame.unknown, frame.params, sol.expression,
        sol.new_fn, sol.arity, tuple(sol.invariants), (), forward, {}, {},
    )


def rules_to_solution(state: CascadeState, sys: PdeSystem) -> GeneralSolution:
    """Fold the per-level solutions innermost-outward into one expression."""
    if not state.levels:
        return GeneralSolution(
            None,
            _surviving(state, []),
            [normalize(e) for e in state.unsolved],
            state.trace,
            state.probabilistic,
        )
    fn_rules: Dict[str, FnRule] = {}
    final: Optional[Expr] = None
    for k in range(len(state.levels) - 1, -1, -1):
        lvl = state.levels[k]
        body = lvl.solution
        if fn_rules:
            body = normalize(substitute(body, {}, fn_rules))
        if k == 0:
            final = body
        else:
            fn_rules[lvl.unknown.name] = FnRule(lvl.variables, body)
    # unsolved equations become residual constraints on the generated
    # functions: substitute the folded solution, derivatives included
    res_subs = {sys.unknown.name: final}
    for p, v in zip(sys.p_syms, sys.indep_vars):
        res_subs[p.name] = normalize(differentiate(final, v))
    unsolved = []
    for e in state.unsolved:
        r = normalize(substitute(e, res_subs))
        if not is_zeroish(r):
            unsolved.append(r)
    return GeneralSolution(
        final, _surviving(state, [final] + unsolved), unsolved, state.trace, state.probabilistic
    )


def _surviving(state: CascadeState, exprs) -> List[Tuple[str, int]]:
    present: Dict[str, int] = {}
    for e in exprs:
        if e is None:
            continue
        present.update(arb_functions(e))
        for name, arity in state.counter_names:
            if arity == 0 and has_symbol(e, name):
                present[name] = 0
    ordered = [(n, a) for n, a in state.counter_names if n in present]
    return ordered


def solve_compatible(sys: PdeSystem, config: Optional[SolveConfig] = None) -> GeneralSolution:
    """Cascade over a compatible system, with the complete (m = n, z-free
    right-hand sides) case routed through exact-form integration."""
    config = config or SolveConfig()
    names = NameSource(_taken_names(sys))
    solved = solve_for_derivatives(sys)
    if solved is not None and not solved.free and sys.m >= sys.n:
        rhs = [solved.pivots[p.name] for p in sys.p_syms]
        clean = all(
            not has_symbol(g, sys.unknown.name)
            and not any(has_symbol(g, p.name) for p in sys.p_syms)
            for g in rhs
        )
        if clean:
            exact = integrate_exact_form(solved.pivots, sys.indep_vars, sys.p_syms, names, config)
            if exact is not None:
                const = next(
                    n for n in free_symbols(exact)
                    if n not in {v.name for v in sys.indep_vars}
                    and n not in {p.name for p in sys.params}
                )
                return GeneralSolution(
                    exact, [(const, 0)], [], ["integrated the exact differential form"]
                )
    state = pdes_to_rules(sys, config, names)
    return rules_to_solution(state, sys)


def solve_overdetermined(sys: PdeSystem, config: Optional[SolveConfig] = None) -> SolveOutcome:
    """Completion followed by the cascade; verdicts pass through."""
    config = (config or SolveConfig()).start()
    trace: List[str] = []
    try:
        rank = jacobian_rank(sys, config.seed)
        if rank != sys.m:
            trace.append(
                f"jacobian rank {rank} differs from the equation count {sys.m}; "
                "the equations are functionally dependent"
            )
            report = CompatReport("unsupported", sys, trace=trace)
            return SolveOutcome(UNSUPPORTED_STATUS, None, report, trace)
        report = complete(sys, config)
        trace.extend(report.trace)
        if report.verdict != COMPATIBLE:
            status = INCOMPATIBLE_STATUS if report.verdict == "incompatible" else UNSUPPORTED_STATUS
            return SolveOutcome(status, None, report, trace)
        solution = solve_compatible(report.completed, config)
        solution.probabilistic = solution.probabilistic or report.probabilistic
        trace.extend(solution.trace)
        status = SOLVED if solution.solution is not None and not solution.unsolved else PARTIAL
        if solution.solution is None and not solution.unsolved:
            status = UNSUPPORTED_STATUS
        return SolveOutcome(status, solution, report, trace)
    except SolveTimeout:
        trace.append("time budget exhausted")
        report = CompatReport("unsupported", sys, trace=trace)
        return SolveOutcome(UNSUPPORTED_STATUS, None, report, trace)
