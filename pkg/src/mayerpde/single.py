"""Closed-form solution of one first-order PDE inside the cascade.

Dispatch: direct integration for ``p_i = g(x)``; a separable reduction for
``p_i = g(x) * h(z)`` through the substitution ``W = int dz/h``; the method
of characteristics on the extended field over (x, z) for quasilinear
equations; and exact-form integration for a complete system solved for all
derivatives.  Anything nonlinear in the derivatives is reported unsolved.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

from .calculus import integrate_univariate, isolate
from .config import SolveConfig
from .expr import (
    Expr,
    Mul,
    Sym,
    add,
    appfn,
    differentiate,
    has_symbol,
    mul,
    normalize,
    num,
    power,
    substitute,
    sym,
)
from .integrals import VectorField, first_integrals
from .nf import ZeroState, is_zero, is_zeroish


@dataclass
class SingleSolution:
    expression: Expr  # explicit value of the unknown over the current variables
    invariants: Tuple[Expr, ...]  # arguments of the generated function
    new_fn: str
    arity: int
    particular: Optional[Expr] = None
    notes: Tuple[str, ...] = ()


class NameSource:
    """Collision-free generated names (functions/constants and variables)."""

    def __init__(self, taken):
        self.taken = set(taken)
        self.fn_counter = 0
        self.var_counter = 0

    def function(self) -> str:
        while True:
            self.fn_counter += 1
            name = f"C{self.fn_counter}"
            if name not in self.taken:
                self.taken.add(name)
                return name

    def variable(self) -> str:
        while True:
            self.var_counter += 1
            name = f"u{self.var_counter}"
            if name not in self.taken:
                self.taken.add(name)
                return name


def generated_value(name: str, invariants) -> Expr:
    """Apply a generated function; a nullary one is a plain constant symbol."""
    if invariants:
        return appfn(name, *invariants)
    return sym(name)


def solve_single_pde(
    eq: Expr,
    variables: Tuple[Sym, ...],
    unknown: Sym,
    p_syms: Tuple[Sym, ...],
    params: Tuple[Sym, ...],
    names: NameSource,
    config: SolveConfig,
) -> Optional[SingleSolution]:
    eq = normalize(eq)
    coeffs = []
    for p in p_syms:
        c = differentiate(eq, p)
        if any(has_symbol(c, q.name) for q in p_syms):
            return None  # not quasilinear
        coeffs.append(c)
    rhs = normalize(mul(num(-1), substitute(eq, {p.name: num(0) for p in p_syms})))
    active = [
        i
        for i, c in enumerate(coeffs)
        if is_zero(c, config.seed) not in (ZeroState.ZERO, ZeroState.PROBABLY_ZERO)
    ]
    if not active:
        return None
    if len(active) == 1:
        got = _single_derivative(eq, active[0], coeffs, rhs, variables, unknown, params, names, config)
        if got is not None:
            return got
    return _characteristics(coeffs, rhs, variables, unknown, params, names, config)


def _single_derivative(eq, i, coeffs, rhs, variables, unknown, params, names, config):
    """p_i = R with R free of other derivatives: integrate directly, or
    reduce a separable z dependence first."""
    xi = variables[i]
    r = normalize(mul(rhs, power(coeffs[i], num(-1))))
    others = tuple(v for j, v in enumerate(variables) if j != i)
    if not has_symbol(r, unknown.name):
        anti = integrate_univariate(r, xi)
        if anti is None:
            return None
        fn = names.function()
        expr = add(generated_value(fn, others), anti)
        return SingleSolution(normalize(expr), others, fn, len(others), particular=anti)
    h, g = _split_unknown_factor(r, unknown, variables, params)
    if h is None or not has_symbol(h, unknown.name):
        return None
    anti_g = integrate_univariate(g, xi)
    transform = integrate_univariate(power(h, num(-1)), unknown)
    if anti_g is None or transform is None:
        return None
    marker = sym("@target")
    notes: List[str] = []
    solved = isolate(
        normalize(add(transform, mul(num(-1), add(marker, anti_g)))), unknown, notes
    )
    if solved is None:
        return None
    fn = names.function()
    solved = substitute(solved, {"@target": generated_value(fn, others)})
    return SingleSolution(
        normalize(solved), others, fn, len(others), particular=anti_g, notes=tuple(notes)
    )


def _split_unknown_factor(r: Expr, unknown: Sym, variables, params):
    """r = g * h(unknown) when every unknown-carrying factor is pure in it."""
    factors = list(r.args) if isinstance(r, Mul) else [r]
    h_parts, g_parts = [], []
    for f in factors:
        if has_symbol(f, unknown.name):
            if any(has_symbol(f, v.name) for v in variables):
                return None, None
            h_parts.append(f)
        else:
            g_parts.append(f)
    if not h_parts:
        return None, None
    return mul(*h_parts), (mul(*g_parts) if g_parts else num(1))


def _characteristics(coeffs, rhs, variables, unknown, params, names, config):
    """General quasilinear route on the extended field over (x, z)."""
    ext_vars = tuple(variables) + (unknown,)
    ext_coeffs = tuple(coeffs) + (normalize(rhs),)
    needed = len(variables)
    invs = first_integrals(VectorField(ext_vars, ext_coeffs), needed, config, params=params)
    if len(invs) < needed:
        return None
    ordered = _isolation_order(invs, unknown)
    for k in ordered:
        phi = invs[k]
        if not has_symbol(phi, unknown.name):
            continue
        rest = tuple(invs[j] for j in range(len(invs)) if j != k)
        if any(has_symbol(o, unknown.name) for o in rest):
            continue
        marker = sym("@target")
        notes: List[str] = []
        solved = isolate(normalize(add(phi, mul(num(-1), marker))), unknown, notes)
        if solved is None:
            continue
        fn = names.function()
        solved = substitute(solved, {"@target": generated_value(fn, rest)})
        return SingleSolution(normalize(solved), rest, fn, len(rest), notes=tuple(notes))
    return None


def _isolation_order(invs, unknown: Sym):
    def score(k):
        phi = invs[k]
        if isinstance(phi, Sym) and phi.name == unknown.name:
            return (0, k)
        c = differentiate(phi, unknown)
        if not has_symbol(c, unknown.name):
            return (1, k)
        return (2, k)

    return sorted(range(len(invs)), key=score)


def integrate_exact_form(
    pivots: dict,
    variables: Tuple[Sym, ...],
    p_syms: Tuple[Sym, ...],
    names: NameSource,
    config: SolveConfig,
) -> Optional[Expr]:
    """Successive integration of dz = sum g_i dx_i for a complete system.

    Residuals that are functionally independent of already-integrated
    variables are rewritten by pinning those variables at a regular value,
    then integrated from the univariate table.
    """
    accum = num(0)
    for i, var in enumerate(variables):
        config.deadline.check()
        g = pivots[p_syms[i].name]
        residual = normalize(add(g, mul(num(-1), differentiate(accum, var))))
        if is_zeroish(residual, config.seed):
            continue
        for prev in variables[:i]:
            if not has_symbol(residual, prev.name):
                continue
            if not is_zeroish(differentiate(residual, prev), config.seed):
                return None
            residual = _pin_variable(residual, prev)
            if residual is None:
                return None
        anti = integrate_univariate(residual, var)
        if anti is None:
            return None
        accum = normalize(add(accum, anti))
    for i, var in enumerate(variables):
        check = add(differentiate(accum, var), mul(num(-1), pivots[p_syms[i].name]))
        if not is_zeroish(normalize(check), config.seed):
            return None
    return normalize(add(accum, sym(names.function())))


def _pin_variable(e: Expr, var: Sym) -> Optional[Expr]:
    for candidate in (1, 2, 3, 5, 7):
        try:
            return normalize(substitute(e, {var.name: num(candidate)}))
        except Exception:
            continue
    return None
