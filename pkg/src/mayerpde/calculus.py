"""Univariate antiderivative table, equation isolation, and linear solving
over the rational-function field."""

from __future__ import annotations

from fractions import Fraction
from typing import List, Optional

from .expr import (
    Add,
    Call,
    Expr,
    Mul,
    Num,
    Pow,
    Sym,
    add,
    call,
    differentiate,
    free_symbols,
    has_symbol,
    mul,
    node_count,
    normalize,
    num,
    power,
    replace_nodes,
    substitute,
    sym,
)
from .nf import Universe, is_zero, is_zeroish, nf_to_expr, to_nf, ZeroState


def integrate_univariate(e: Expr, s: Sym) -> Optional[Expr]:
    """Antiderivative of ``e`` in ``s`` from a small closed table.

    Covers anything rational in ``s`` whose denominator is a monomial in
    ``s`` (polynomials, ``c/s^k``), exp/sin/cos of arguments affine in ``s``,
    and linear combinations of those.  Returns None on a table miss; any
    returned antiderivative is re-checked by differentiation.
    """
    res = _antiderivative(e, s)
    if res is None:
        return None
    if not is_zeroish(add(differentiate(res, s), mul(num(-1), e))):
        return None
    return res


def _antiderivative(e: Expr, s: Sym) -> Optional[Expr]:
    if not has_symbol(e, s.name):
        return mul(e, s)
    if isinstance(e, Add):
        parts = []
        for t in e.args:
            p = _antiderivative(t, s)
            if p is None:
                return None
            parts.append(p)
        return add(*parts)
    if isinstance(e, Mul):
        free = [f for f in e.args if not has_symbol(f, s.name)]
        dep = [f for f in e.args if has_symbol(f, s.name)]
        if free:
            inner = _antiderivative(mul(*dep), s)
            if inner is None:
                return None
            return mul(*free, inner)
    if isinstance(e, Call):
        return _call_antiderivative(e, s)
    if isinstance(e, Pow) and isinstance(e.exponent, Num):
        got = _power_rule(e.base, e.exponent.value, s)
        if got is not None:
            return got
    return _rational_antiderivative(e, s)


def _power_rule(base: Expr, k, s: Sym) -> Optional[Expr]:
    """(a*s + b)^k for constant a != 0, any rational k (log at k = -1)."""
    slope = differentiate(base, s)
    if has_symbol(slope, s.name) or is_zeroish(slope):
        return None
    inv = power(slope, num(-1))
    if k == -1:
        return mul(call("log", base), inv)
    from fractions import Fraction as _F

    return mul(power(base, num(k + 1)), num(_F(1) / (k + 1)), inv)


def _call_antiderivative(e: Call, s: Sym) -> Optional[Expr]:
    a = e.args[0]
    slope = differentiate(a, s)
    if has_symbol(slope, s.name) or is_zeroish(slope):
        return None
    inv = power(slope, num(-1))
    if e.head == "exp":
        return mul(e, inv)
    if e.head == "sin":
        return mul(num(-1), call("cos", a), inv)
    if e.head == "cos":
        return mul(call("sin", a), inv)
    return None


def _rational_antiderivative(e: Expr, s: Sym) -> Optional[Expr]:
    uni = Universe.of(e)
    if s.name in uni.sym_power:
        return None  # fractional powers of s: handled by the power rule only
    for atom in uni.atoms:
        if has_symbol(atom, s.name):
            return None
    try:
        n, d = to_nf(e, uni)
    except Exception:
        return None
    i = uni.index[s.name]
    dcoeffs = d.coeffs_in(i)
    if len(dcoeffs) != 1:
        return None  # denominator must be a monomial in s
    m = next(iter(dcoeffs))
    dc = dcoeffs[m]
    parts = []
    for k, cp in n.coeffs_in(i).items():
        coeff = mul(nf_to_expr(cp, uni), power(nf_to_expr(dc, uni), num(-1)))
        deg = k - m
        if deg == -1:
            parts.append(mul(coeff, call("log", s)))
        else:
            parts.append(mul(coeff, power(s, num(deg + 1)), num(Fraction(1, deg + 1))))
    return add(*parts)


# -- affine structure ---------------------------------------------------------


def affine_parts(e: Expr, targets: List[Sym]):
    """(constant, coefficients) when e is affine in the targets, else None."""
    names = [t.name for t in targets]
    coeffs = []
    for t in targets:
        c = differentiate(e, t)
        if any(has_symbol(c, n) for n in names):
            return None
        coeffs.append(c)
    const = substitute(e, {n: num(0) for n in names})
    return const, coeffs


def isolate(eq: Expr, target: Sym, notes: Optional[list] = None) -> Optional[Expr]:
    """Solve eq = 0 for the target symbol.

    Handles affine occurrences, a single repeated power/exp/log wrapper
    around the target (principal branch for even roots, recorded in notes),
    and recursion through such wrappers.
    """
    if not has_symbol(eq, target.name):
        return None
    aff = affine_parts(eq, [target])
    if aff is not None:
        const, (c,) = aff
        if is_zero(c) not in (ZeroState.ZERO, ZeroState.PROBABLY_ZERO):
            return normalize(mul(num(-1), const, power(c, num(-1))))
        return None
    wrappers = set()
    if not _collect_wrappers(eq, target.name, wrappers):
        return None
    if len(wrappers) != 1:
        return None
    (wrap,) = wrappers
    marker = sym("@w")
    flat = replace_nodes(eq, {wrap: marker})
    if has_symbol(flat, target.name):
        return None
    val = isolate(flat, marker, notes)
    if val is None:
        return None
    inner, inner_val = _invert_wrapper(wrap, val, target.name, notes)
    if inner is None:
        return None
    if isinstance(inner, Sym) and inner.name == target.name:
        return normalize(inner_val)
    return isolate(normalize(add(inner, mul(num(-1), inner_val))), target, notes)


def _collect_wrappers(e: Expr, name: str, out: set) -> bool:
    """Gather maximal invertible subtrees containing the target."""
    if not has_symbol(e, name):
        return True
    if isinstance(e, Sym):
        return False  # bare occurrence outside any wrapper
    if isinstance(e, Pow):
        out.add(e)
        return True
    if isinstance(e, Call):
        if e.head in ("exp", "log"):
            out.add(e)
            return True
        return False
    if isinstance(e, (Add, Mul)):
        return all(_collect_wrappers(a, name, out) for a in e.args)
    return False  # arbitrary functions of the target cannot be inverted


def _invert_wrapper(wrap: Expr, val: Expr, name: str, notes: Optional[list]):
    if isinstance(wrap, Pow):
        b, x = wrap.base, wrap.exponent
        if has_symbol(x, name) and not has_symbol(b, name):
            # b^u = val  =>  u = log(val)/log(b)
            return x, mul(call("log", val), power(call("log", b), num(-1)))
        if has_symbol(x, name):
            return None, None
        if not isinstance(x, Num):
            return None, None
        k = x.value
        if notes is not None and (k.denominator != 1 or k.numerator % 2 == 0):
            if k.denominator % 2 == 0 or (k.denominator == 1 and k.numerator % 2 == 0):
                notes.append(f"principal branch chosen for exponent {k}")
        return b, power(val, num(Fraction(1) / k))
    if isinstance(wrap, Call):
        if wrap.head == "exp":
            return wrap.args[0], call("log", val)
        if wrap.head == "log":
            return wrap.args[0], call("exp", val)
    return None, None


# -- linear systems over the rational-function field ---------------------------


def solve_linear(eqs: List[Expr], targets: List[Sym]) -> Optional[dict]:
    """Gaussian elimination for equations affine in the targets.

    Returns a mapping target-name -> Expr whose back-substitution makes
    every equation normalize to zero, or None when the system is not
    affine, inconsistent, or rank-deficient for the requested targets.
    """
    rows = []
    for eq in eqs:
        aff = affine_parts(eq, targets)
        if aff is None:
            return None
        rows.append([aff[0]] + list(aff[1]))
    n = len(targets)
    pivots = {}  # column -> reduced row at elimination time
    active = list(range(len(rows)))
    remaining = list(range(n))
    while remaining:
        best = None
        for ri in active:
            row = rows[ri]
            for j in remaining:
                c = row[1 + j]
                if is_zero(c) in (ZeroState.ZERO, ZeroState.PROBABLY_ZERO):
                    continue
                score = (node_count(c), j)
                if best is None or score < best[0]:
                    best = (score, ri, j)
        if best is None:
            break
        _, ri, j = best
        row = rows[ri]
        pivots[j] = row
        active.remove(ri)
        remaining.remove(j)
        pc = row[1 + j]
        for oi in active:
            other = rows[oi]
            cj = other[1 + j]
            if is_zero(cj) in (ZeroState.ZERO, ZeroState.PROBABLY_ZERO):
                continue
            f = normalize(mul(cj, power(pc, num(-1))))
            rows[oi] = [
                normalize(add(o, mul(num(-1), f, p)))
                for o, p in zip(other, row)
            ]
    if remaining:
        return None
    for oi in active:
        # residual rows must vanish identically
        leftover = add(rows[oi][0], *[mul(rows[oi][1 + j], t) for j, t in enumerate(targets)])
        if not is_zeroish(normalize(leftover)):
            return None
    # triangular resolution: repeatedly substitute known values
    unresolved = dict(pivots)
    values: dict = {}
    guard = n * n + 4
    while unresolved and guard:
        guard -= 1
        progress = False
        for j, row in list(unresolved.items()):
            needed = [k for k in pivots if k != j and not is_zeroish(row[1 + k])]
            if all(targets[k].name in values for k in needed):
                expr = row[0]
                for k in needed:
                    expr = add(expr, mul(row[1 + k], values[targets[k].name]))
                rhs = normalize(mul(num(-1), expr, power(row[1 + j], num(-1))))
                values[targets[j].name] = rhs
                del unresolved[j]
                progress = True
        if not progress:
            return None
    if unresolved:
        return None
    for eq in eqs:
        if not is_zeroish(normalize(substitute(eq, values))):
            return None
    return values
