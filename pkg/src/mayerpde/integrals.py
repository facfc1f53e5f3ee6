"""First integrals of characteristic vector fields.

A heuristic ladder produces candidate invariants; every candidate is
re-certified by checking that the field annihilates it exactly (or
probabilistically for transcendental coefficients), and functional
independence is certified by the rank of the Jacobian at sampled points.

Rungs:
  H1  variables whose coefficient vanishes identically;
  H2  scaling fields: monomial invariants from the integer null space of
      the exponent constraint;
  H3  pairs of directions whose coefficients are already-certified
      invariants: bilinear invariants a_j*v_i - a_i*v_j;
  H4  planar reductions dv_j/dv_i = a_j/a_i solved when direct, separable
      or affine, with foreign variables eliminated through known invariants;
  H5  polynomial first integrals up to a degree bound by undetermined
      coefficients over the rationals.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

from .calculus import integrate_univariate, isolate
from .config import SolveConfig
from .expr import (
    Add,
    Call,
    Expr,
    Mul,
    Num,
    Sym,
    _coeff_term,
    add,
    appfn,
    arb_functions,
    call,
    differentiate,
    free_symbols,
    has_symbol,
    mul,
    node_count,
    normalize,
    num,
    power,
    substitute,
    sym,
)
from .linalg import float_rank, fraction_nullspace, fraction_rank, integer_ratio
from .nf import (
    EvalError,
    Point,
    Universe,
    ZeroState,
    eval_at,
    is_zero,
    is_zeroish,
    nf_to_expr,
    to_nf,
)
from .poly import Poly, exact_div, poly_gcd


@dataclass(frozen=True)
class VectorField:
    """Characteristic field: one coefficient expression per direction."""

    variables: Tuple[Sym, ...]
    coeffs: Tuple[Expr, ...]

    def apply(self, phi: Expr) -> Expr:
        return normalize(
            add(*[mul(a, differentiate(phi, v)) for v, a in zip(self.variables, self.coeffs)])
        )


def annihilates(field: VectorField, phi: Expr, seed: int = 0) -> bool:
    return is_zero(field.apply(phi), seed) in (ZeroState.ZERO, ZeroState.PROBABLY_ZERO)


def _jacobian_rank_at(cands: List[Expr], variables, seed: int) -> int:
    rows = [[differentiate(c, v) for v in variables] for c in cands]
    flat = [e for row in rows for e in row]
    names = set().union(*(free_symbols(e) for e in flat)) if flat else set()
    fns: dict = {}
    for e in flat:
        fns.update(arb_functions(e))
    best = 0
    for t in range(4):
        for attempt in range(20):
            rng = random.Random(f"indep:{seed}:{t}:{attempt}")
            pt = Point.generate(names, fns, rng)
            try:
                m = [[float(eval_at(e, pt)) for e in row] for row in rows]
            except EvalError:
                continue
            best = max(best, float_rank(m, tol=1e-7))
            break
        if best == len(cands):
            break
    return best


def functionally_independent(cands: List[Expr], variables, seed: int = 0) -> bool:
    return _jacobian_rank_at(cands, variables, seed) == len(cands)


# -- candidate cleanup --------------------------------------------------------


def _strip_constant_terms(phi: Expr) -> Expr:
    if isinstance(phi, Add):
        kept = [t for t in phi.args if not isinstance(t, Num)]
        if kept:
            return add(*kept)
    return phi


def _strip_constant_factor(phi: Expr) -> Expr:
    from math import gcd

    c, rest = _coeff_term(phi)
    if rest is None:
        return phi
    if isinstance(phi, Add):
        # divide by the rational gcd of the term coefficients, fix the sign
        g = Fraction(0)
        for t in phi.args:
            cc = _coeff_term(t)[0]
            if not g:
                g = abs(cc)
            else:
                g = Fraction(
                    gcd(g.numerator, abs(cc.numerator)),
                    (g.denominator * cc.denominator) // gcd(g.denominator, cc.denominator),
                )
        if g not in (0, 1):
            phi = mul(num(Fraction(1) / g), phi)
        first = _coeff_term(phi.args[0] if isinstance(phi, Add) else phi)[0]
        if first < 0:
            phi = mul(num(-1), phi)
        return phi
    return rest


def _cleanup(phi: Expr, field: VectorField, seed: int) -> Optional[Expr]:
    phi = normalize(phi)
    phi = _strip_constant_terms(phi)
    # pure log combination -> product form
    ex = call("exp", phi)
    if not _mentions_exp(ex) and _mentions_log(phi):
        if annihilates(field, ex, seed):
            phi = ex
    # clear a denominator when the cleared form is still an invariant;
    # the normal-form numerator is exactly phi * den, already expanded
    uni = Universe.of(phi)
    try:
        n, d = to_nf(phi, uni)
        if not d.is_constant:
            cand = _strip_constant_terms(nf_to_expr(n, uni))
            if annihilates(field, cand, seed):
                phi = cand
    except Exception:
        pass
    phi = _strip_constant_factor(normalize(phi))
    if isinstance(phi, Num):
        return None
    if not any(has_symbol(phi, v.name) for v in field.variables):
        return None
    return phi


def _mentions_exp(e: Expr) -> bool:
    if isinstance(e, Call) and e.head == "exp":
        return True
    from .expr import children

    return any(_mentions_exp(c) for c in children(e))


def _mentions_log(e: Expr) -> bool:
    if isinstance(e, Call) and e.head == "log":
        return True
    from .expr import children

    return any(_mentions_log(c) for c in children(e))


# -- the ladder ----------------------------------------------------------------


def first_integrals(
    field: VectorField,
    needed: int,
    config: Optional[SolveConfig] = None,
    params: Tuple[Sym, ...] = (),
) -> List[Expr]:
    """Up to ``needed`` certified, functionally independent first integrals."""
    config = config or SolveConfig()
    seed = config.seed
    found: List[Expr] = []

    def consider(phi: Expr, pre_clean: bool = True) -> bool:
        if len(found) >= needed:
            return False
        config.deadline.check()
        cand = _cleanup(phi, field, seed) if pre_clean else normalize(phi)
        if cand is None or isinstance(cand, Num):
            return False
        if any(cand == f for f in found):
            return False
        if not annihilates(field, cand, seed):
            return False
        if not functionally_independent(found + [cand], field.variables, seed):
            return False
        found.append(cand)
        return True

    nonzero = [
        i
        for i, a in enumerate(field.coeffs)
        if is_zero(a, seed) not in (ZeroState.ZERO, ZeroState.PROBABLY_ZERO)
    ]
    # H1: directions the flow never moves
    for i, a in enumerate(field.coeffs):
        if i not in nonzero:
            consider(field.variables[i], pre_clean=False)
        if len(found) >= needed:
            return found
    _h2_scaling(field, nonzero, consider, seed)
    if len(found) >= needed:
        return found[:needed]
    for _ in range(needed + 2):  # fixpoint: later rungs reuse found invariants
        before = len(found)
        _h3_bilinear(field, nonzero, found, consider, seed)
        if len(found) >= needed:
            break
        _h4_planar(field, nonzero, found, consider, config, params)
        if len(found) >= needed:
            break
        if len(found) == before:
            break
    if len(found) < needed:
        _h5_polynomial(field, consider, config)
    return found[:needed]


def _h2_scaling(field: VectorField, nonzero, consider, seed: int):
    weights = {}
    for i in nonzero:
        r = normalize(mul(field.coeffs[i], power(field.variables[i], num(-1))))
        if not isinstance(r, Num):
            return
        weights[i] = r.value
    if len(weights) < 2:
        return
    idx = sorted(weights)
    row = [weights[i] for i in idx]
    basis = fraction_nullspace([row], len(row))
    for vec in basis:
        ints = integer_ratio(vec)
        first = next((x for x in ints if x), 0)
        if first < 0:
            ints = [-x for x in ints]
        mono = mul(
            *[power(field.variables[idx[k]], num(a)) for k, a in enumerate(ints) if a]
        )
        consider(mono, pre_clean=False)


def _h3_bilinear(field: VectorField, nonzero, found, consider, seed: int):
    invariant_coeff = {}
    for i in nonzero:
        a = field.coeffs[i]
        invariant_coeff[i] = annihilates(field, a, seed)
    for i in nonzero:
        for j in nonzero:
            if j <= i:
                continue
            if invariant_coeff[i] and invariant_coeff[j]:
                phi = add(
                    mul(field.coeffs[j], field.variables[i]),
                    mul(num(-1), field.coeffs[i], field.variables[j]),
                )
                consider(phi)


def _eliminate_foreign(exprs: List[Expr], keep_names, found, params) -> Optional[tuple]:
    """Rewrite exprs over keep_names plus fresh constants standing for the
    known invariants.  Returns (rewritten exprs, constant -> invariant map)."""
    param_names = {p.name for p in params}
    const_map: dict = {}
    inv_of: dict = {}
    exprs = list(exprs)
    for _ in range(8):
        foreign = set()
        for e in exprs:
            for n in free_symbols(e):
                if n not in keep_names and n not in param_names and not n.startswith("@"):
                    foreign.add(n)
        if not foreign:
            return exprs, const_map
        w = sorted(foreign)[0]
        sol = None
        for phi in found:
            if not has_symbol(phi, w):
                continue
            cname = f"@k{len(const_map) + 1}"
            cs = sym(cname)
            got = isolate(normalize(add(phi, mul(num(-1), cs))), sym(w))
            if got is not None and not has_symbol(got, w):
                const_map[cname] = phi
                sol = got
                break
        if sol is None:
            return None
        exprs = [normalize(substitute(e, {w: sol})) for e in exprs]
    return None


def _h4_planar(field: VectorField, nonzero, found, consider, config: SolveConfig, params):
    seed = config.seed
    for i in nonzero:
        for j in nonzero:
            if j <= i:
                continue
            config.deadline.check()
            vi, vj = field.variables[i], field.variables[j]
            keep = {vi.name, vj.name}
            elim = _eliminate_foreign([field.coeffs[i], field.coeffs[j]], keep, found, params)
            if elim is None:
                continue
            (ai, aj), const_map = elim
            if is_zeroish(ai, seed):
                continue
            ratio = normalize(mul(aj, power(ai, num(-1))))
            phi = _solve_planar(ratio, vi, vj)
            if phi is None:
                continue
            if const_map:
                phi = normalize(substitute(phi, const_map))
            consider(phi)


def _split_separable(r: Expr, vi: Sym, vj: Sym):
    """r = g(vi) * h(vj) with no mixed factor, else None."""
    factors = list(r.args) if isinstance(r, Mul) else [r]
    g_parts, h_parts = [], []
    for f in factors:
        fi = has_symbol(f, vi.name)
        fj = has_symbol(f, vj.name)
        if fi and fj:
            return None
        (h_parts if fj else g_parts).append(f)
    return mul(*g_parts) if g_parts else num(1), mul(*h_parts) if h_parts else num(1)


def _solve_planar(r: Expr, vi: Sym, vj: Sym) -> Optional[Expr]:
    """Invariant of dvj/dvi = r(vi, vj) for the solvable shapes."""
    if not has_symbol(r, vj.name):
        anti = integrate_univariate(r, vi)
        if anti is not None:
            return add(vj, mul(num(-1), anti))
        return None
    split = _split_separable(r, vi, vj)
    if split is not None:
        g, h = split
        lhs = integrate_univariate(power(h, num(-1)), vj)
        rhs = integrate_univariate(g, vi)
        if lhs is not None and rhs is not None:
            return add(lhs, mul(num(-1), rhs))
    # affine: dvj/dvi = alpha(vi) vj + beta(vi)
    alpha = differentiate(r, vj)
    if not has_symbol(alpha, vj.name):
        beta = normalize(substitute(r, {vj.name: num(0)}))
        if not has_symbol(beta, vj.name):
            big_a = integrate_univariate(alpha, vi)
            if big_a is not None:
                mu = call("exp", mul(num(-1), big_a))
                rest = integrate_univariate(normalize(mul(mu, beta)), vi)
                if rest is not None:
                    return add(mul(mu, vj), mul(num(-1), rest))
    if not has_symbol(r, vi.name):
        anti = integrate_univariate(power(r, num(-1)), vj)
        if anti is not None:
            return add(vi, mul(num(-1), anti))
    return None


def _h5_polynomial(field: VectorField, consider, config: SolveConfig):
    """Undetermined-coefficient polynomial invariants up to the degree bound."""
    variables = field.variables
    coeffs = list(field.coeffs)
    uni = Universe.of(*(list(coeffs) + list(variables)))
    if uni.atoms:
        return
    # clear denominators: the invariants of c*V match those of V
    try:
        pairs = [to_nf(a, uni) for a in coeffs]
    except Exception:
        return
    common = Poly.const(1, uni.size)
    for _, d in pairs:
        g = poly_gcd(common, d)
        q = exact_div(d, g)
        common = common * (q if q is not None else d)
    cleared = []
    for n_p, d_p in pairs:
        q = exact_div(common, d_p)
        cleared.append(n_p * (q if q is not None else Poly.const(1, uni.size)))
    var_idx = [uni.index[v.name] for v in variables]
    degree = config.degree
    monos = _monomials(uni.size, var_idx, degree)
    while len(monos) > 350 and degree > 2:
        degree -= 1
        monos = _monomials(uni.size, var_idx, degree)
    if not monos:
        return
    # rows: condition monomials; columns: ansatz monomials
    cond_rows: dict = {}
    columns = []
    for col, m in enumerate(monos):
        config.deadline.check()
        mono_poly = Poly({m: Fraction(1)}, uni.size)
        image = Poly({}, uni.size)
        for k, vi in enumerate(var_idx):
            if m[vi] == 0:
                continue
            de = list(m)
            de[vi] -= 1
            dm = Poly({tuple(de): Fraction(m[vi])}, uni.size)
            image = image + cleared[k] * dm
        columns.append(mono_poly)
        for e, c in image.terms.items():
            cond_rows.setdefault(e, {})[col] = c
    rows = []
    for e, entries in sorted(cond_rows.items()):
        rows.append([entries.get(col, Fraction(0)) for col in range(len(monos))])
    basis = fraction_nullspace(rows, len(monos))
    for vec in basis:
        config.deadline.check()
        ints = integer_ratio(vec)
        p = Poly({m: Fraction(c) for m, c in zip(monos, ints) if c}, uni.size)
        if p.is_zero or p.is_constant:
            continue
        consider(nf_to_expr(p, uni))


def _monomials(nvars: int, var_idx, degree: int):
    out = []

    def rec(pos: int, remaining: int, current):
        if pos == len(var_idx):
            if sum(current) > 0:
                e = [0] * nvars
                for vi, d in zip(var_idx, current):
                    e[vi] = d
                out.append(tuple(e))
            return
        for d in range(remaining + 1):
            rec(pos + 1, remaining - d, current + [d])

    rec(0, degree, [])
    return out
