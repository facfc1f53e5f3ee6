"""Rational normal forms, zero testing and numeric evaluation.

An expression that is rational in its symbols has an exact normal form
``num/den`` with polynomial parts over the symbol set.  Expressions that
contain elementary functions, arbitrary-function applications or fractional
powers are handled by treating each such maximal subtree as an opaque
generator ("atom"): a zero normal form over the extended generator set is
still an exact zero certificate, while a nonzero one is inconclusive and
falls back to seeded numeric sampling.
"""

from __future__ import annotations

import math
import random
from enum import Enum
from fractions import Fraction
from typing import Optional

from .expr import (
    Add,
    AppFn,
    Call,
    EvalError,
    Expr,
    FnDeriv,
    FnRule,
    Mul,
    Num,
    Pow,
    Sym,
    add,
    appfn,
    call,
    children,
    fnderiv,
    free_symbols,
    mul,
    power,
    sort_key,
    substitute,
    sym,
)
from .poly import Poly, PolyOverflow, exact_div, poly_gcd

ZERO_TOL = 1e-9
NONZERO_TOL = 1e-6
SAMPLE_COUNT = 20
RESAMPLE_LIMIT = 60


class ZeroState(Enum):
    ZERO = "zero"
    NONZERO = "nonzero"
    PROBABLY_ZERO = "probably_zero"
    PROBABLY_NONZERO = "probably_nonzero"


ZEROISH = (ZeroState.ZERO, ZeroState.PROBABLY_ZERO)


def is_atom(e: Expr) -> bool:
    """A subtree that the polynomial layer treats as an opaque generator."""
    if isinstance(e, (Call, AppFn, FnDeriv)):
        return True
    if isinstance(e, Pow):
        x = e.exponent
        return not (isinstance(x, Num) and x.value.denominator == 1)
    return False


def collect_atoms(e: Expr, out: set):
    if is_atom(e):
        out.add(e)
        return
    for c in children(e):
        collect_atoms(c, out)


def _content_prim(e: Expr):
    """Split off the rational content of a term or sum; sign goes with it."""
    from .expr import _coeff_term
    from math import gcd

    if isinstance(e, Num):
        return e.value, None
    if isinstance(e, Add):
        g = Fraction(0)
        for t in e.args:
            c = _coeff_term(t)[0]
            if not g:
                g = abs(c)
            else:
                g = Fraction(
                    gcd(g.numerator, abs(c.numerator)),
                    (g.denominator * c.denominator) // gcd(g.denominator, c.denominator),
                )
        first = _coeff_term(e.args[0])[0]
        if first < 0:
            g = -g
        return g, mul(Num(Fraction(1) / g), e)
    c, rest = _coeff_term(e)
    if rest is None:
        return c, None
    if c < 0:
        return c, rest
    return c, rest


class Universe:
    """Ordered generator list: sorted symbol names, then sorted atoms.

    Exponentials whose arguments are rational multiples of one another are
    represented as integer powers of one primitive exponential generator, so
    cancellations like exp(u)^2 - exp(2u) stay exact.  Likewise all
    fractional powers of a common base share one primitive root generator;
    when the base is a plain symbol, the symbol itself is expressed through
    that root, so sqrt(y)^3 and y^2 live in the same monomial lattice.
    """

    __slots__ = ("names", "gens", "index", "atom_power", "sym_power")

    def __init__(self, names, atoms):
        self.names = list(names)
        self.atom_power = {}
        self.sym_power = {}
        gens: list = []
        exp_groups: dict = {}
        root_groups: dict = {}
        for a in atoms:
            if isinstance(a, Call) and a.head == "exp":
                content, prim = _content_prim(a.args[0])
                if prim is not None:
                    exp_groups.setdefault(prim, []).append((a, content))
                    continue
            if (
                isinstance(a, Pow)
                and isinstance(a.exponent, Num)
                and a.exponent.value.denominator > 1
            ):
                root_groups.setdefault(a.base, []).append((a, a.exponent.value))
                continue
            self.atom_power[a] = (a, 1)
            gens.append(a)
        for prim in sorted(exp_groups, key=sort_key):
            members = exp_groups[prim]
            den = 1
            for _, c in members:
                den = den * c.denominator // math.gcd(den, c.denominator)
            arg = mul(Num(Fraction(1, den)), prim) if den != 1 else prim
            base = Call("exp", (arg,))
            gens.append(base)
            for a, c in members:
                self.atom_power[a] = (base, int(c * den))
        for b in sorted(root_groups, key=sort_key):
            members = root_groups[b]
            den = 1
            for _, e in members:
                den = den * e.denominator // math.gcd(den, e.denominator)
            gen = Pow(b, Num(Fraction(1, den)))
            gens.append(gen)
            for a, e in members:
                self.atom_power[a] = (gen, int(e * den))
            if isinstance(b, Sym) and b.name in self.names:
                self.sym_power[b.name] = (gen, den)
        gens = sorted(set(gens), key=sort_key)
        self.gens = gens
        self.index = {}
        for i, n in enumerate(self.names):
            self.index[n] = i
        for j, a in enumerate(gens):
            self.index[a] = len(self.names) + j

    @property
    def size(self) -> int:
        return len(self.names) + len(self.gens)

    @property
    def atoms(self) -> list:
        return self.gens

    @classmethod
    def of(cls, *exprs, with_atoms=True) -> Optional["Universe"]:
        names = set()
        atoms: set = set()
        for e in exprs:
            names |= free_symbols(e)
            collect_atoms(e, atoms)
        if atoms and not with_atoms:
            return None
        return cls(sorted(names), sorted(atoms, key=sort_key))

    def gen_expr(self, i: int) -> Expr:
        if i < len(self.names):
            return sym(self.names[i])
        return self.gens[i - len(self.names)]


def _nf_reduce(n: Poly, d: Poly):
    if n.is_zero:
        return n, Poly.const(1, n.nvars)
    g = poly_gcd(n, d)
    if not g.is_constant or g.constant_value() != 1:
        n2 = exact_div(n, g)
        d2 = exact_div(d, g)
        if n2 is not None and d2 is not None:
            n, d = n2, d2
    _, lc = d.leading()
    if lc != 1:
        inv = Fraction(1) / lc
        n = n.scale(inv)
        d = d.scale(inv)
    return n, d


def to_nf(e: Expr, uni: Universe):
    """(numerator, denominator) polynomials over the universe, fully reduced."""
    n, d = _to_nf(e, uni)
    return _nf_reduce(n, d)


def _to_nf(e: Expr, uni: Universe):
    nv = uni.size
    one = Poly.const(1, nv)
    if isinstance(e, Num):
        return Poly.const(e.value, nv), one
    if isinstance(e, Sym):
        root = uni.sym_power.get(e.name)
        if root is not None:
            gen, den = root
            return Poly.variable(uni.index[gen], nv).pow_int(den), one
        return Poly.variable(uni.index[e.name], nv), one
    if is_atom(e):
        base, k = uni.atom_power.get(e, (e, 1))
        v = Poly.variable(uni.index[base], nv)
        if k >= 0:
            return v.pow_int(k), one
        return one, v.pow_int(-k)
    if isinstance(e, Add):
        n, d = _to_nf(e.args[0], uni)
        for t in e.args[1:]:
            n2, d2 = _to_nf(t, uni)
            g = poly_gcd(d, d2)
            if not g.is_constant:
                da = exact_div(d, g)
                db = exact_div(d2, g)
                n = n * db + n2 * da
                d = d * db
            else:
                n = n * d2 + n2 * d
                d = d * d2
        return _nf_reduce(n, d)
    if isinstance(e, Mul):
        n, d = one, one
        for f in e.args:
            n2, d2 = _to_nf(f, uni)
            g1 = poly_gcd(n, d2)
            if not g1.is_constant:
                n = exact_div(n, g1)
                d2 = exact_div(d2, g1)
            g2 = poly_gcd(n2, d)
            if not g2.is_constant:
                n2 = exact_div(n2, g2)
                d = exact_div(d, g2)
            n = n * n2
            d = d * d2
        return n, d
    if isinstance(e, Pow):
        k = e.exponent.value.numerator  # integer by atom classification
        n, d = _to_nf(e.base, uni)
        if k >= 0:
            return n.pow_int(k), d.pow_int(k)
        if n.is_zero:
            raise EvalError("division by zero in normal form")
        return d.pow_int(-k), n.pow_int(-k)
    raise TypeError(f"unhandled node in normal form: {e!r}")


class RationalNF:
    """Canonical num/den pair over plain symbols only (the strict contract)."""

    __slots__ = ("num", "den", "uni")

    def __init__(self, num: Poly, den: Poly, uni: Universe):
        self.num = num
        self.den = den
        self.uni = uni

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    def __eq__(self, other):
        return (
            isinstance(other, RationalNF)
            and self.uni.names == other.uni.names
            and self.num == other.num
            and self.den == other.den
        )

    def __hash__(self):
        return hash((tuple(self.uni.names), frozenset(self.num.terms.items())))


def to_rational_nf(e: Expr, names=None) -> Optional[RationalNF]:
    """Strict normal form: absent when any non-rational node occurs."""
    atoms: set = set()
    collect_atoms(e, atoms)
    if atoms:
        return None
    if names is None:
        names = sorted(free_symbols(e))
    uni = Universe(names, [])
    try:
        n, d = to_nf(e, uni)
    except (PolyOverflow, EvalError):
        return None
    return RationalNF(n, d, uni)


def nf_to_expr(p: Poly, uni: Universe) -> Expr:
    terms = []
    for e, c in sorted(p.terms.items()):
        factors = [Num(c)]
        for i, k in enumerate(e):
            if k:
                factors.append(power(uni.gen_expr(i), Num(Fraction(k))))
        terms.append(mul(*factors))
    return add(*terms)


# -- numeric evaluation -------------------------------------------------------


class Point:
    """Exact rational assignment for symbols plus polynomial bodies for
    arbitrary functions (total degree at most two, seeded coefficients)."""

    __slots__ = ("values", "fn_rules")

    def __init__(self, values: dict, fn_rules: dict):
        self.values = values
        self.fn_rules = fn_rules

    @classmethod
    def generate(cls, names, fn_arities: dict, rng: random.Random) -> "Point":
        values = {n: _random_rational(rng) for n in sorted(names)}
        fn_rules = {
            f: _random_poly_rule(fn_arities[f], rng) for f in sorted(fn_arities)
        }
        return cls(values, fn_rules)


def _random_rational(rng: random.Random) -> Fraction:
    # kept small so exponentials stay well scaled under float evaluation
    return Fraction(rng.randint(1, 9), rng.randint(2, 8)) + Fraction(1, rng.randint(3, 17))


def _random_poly_rule(arity: int, rng: random.Random) -> FnRule:
    params = tuple(sym(f"@{j+1}") for j in range(arity))
    terms = [Num(Fraction(rng.randint(1, 9), rng.randint(1, 4)))]
    for p in params:
        terms.append(mul(Num(Fraction(rng.randint(-6, 6), rng.randint(1, 3))), p))
    for i, p in enumerate(params):
        for q in params[i:]:
            terms.append(mul(Num(Fraction(rng.randint(-4, 4), rng.randint(1, 3))), p, q))
    return FnRule(params, add(*terms))


def eval_at(e: Expr, pt: Point):
    """Exact rational when the expression is rational; IEEE float otherwise."""
    if pt.fn_rules:
        e = substitute(e, {}, pt.fn_rules)
    return _eval(e, pt.values)


def _eval(e: Expr, vals: dict):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Sym):
        try:
            return vals[e.name]
        except KeyError:
            raise EvalError(f"unbound symbol {e.name!r}") from None
    if isinstance(e, Add):
        total = Fraction(0)
        for a in e.args:
            total = total + _eval(a, vals)
        return total
    if isinstance(e, Mul):
        total = Fraction(1)
        for a in e.args:
            total = total * _eval(a, vals)
        return total
    if isinstance(e, Pow):
        b = _eval(e.base, vals)
        x = _eval(e.exponent, vals)
        if isinstance(x, Fraction) and x.denominator == 1:
            k = x.numerator
            if b == 0 and k < 0:
                raise EvalError("division by zero")
            try:
                return b**k
            except OverflowError:
                raise EvalError("overflow") from None
        bf = float(b)
        xf = float(x)
        if bf < 0:
            raise EvalError("fractional power of a negative value")
        if bf == 0 and xf < 0:
            raise EvalError("division by zero")
        try:
            return bf**xf
        except (OverflowError, ZeroDivisionError):
            raise EvalError("overflow") from None
    if isinstance(e, Call):
        a = float(_eval(e.args[0], vals))
        try:
            if e.head == "exp":
                return math.exp(a)
            if e.head == "log":
                if a <= 0:
                    raise EvalError("log of a non-positive value")
                return math.log(a)
            if e.head == "sin":
                return math.sin(a)
            return math.cos(a)
        except OverflowError:
            raise EvalError("overflow") from None
    if isinstance(e, (AppFn, FnDeriv)):
        raise EvalError(f"uninstantiated function {e.fn!r}")
    raise TypeError(f"not an Expr: {e!r}")


def sample_values(e: Expr, seed: int, count: int = SAMPLE_COUNT):
    """Numeric values of e at ``count`` seeded points, resampling on errors."""
    from .expr import arb_functions

    names = free_symbols(e)
    fns = arb_functions(e)
    out = []
    attempts = 0
    i = 0
    while len(out) < count:
        attempts += 1
        if attempts > count + RESAMPLE_LIMIT:
            raise EvalError("could not find enough regular sample points")
        rng = random.Random(f"{seed}:{i}")
        i += 1
        pt = Point.generate(names, fns, rng)
        try:
            out.append(eval_at(e, pt))
        except EvalError:
            continue
    return out


_zero_cache: dict = {}


def is_zero(e: Expr, seed: int = 0) -> ZeroState:
    """Exact zero/nonzero via normal forms when possible, sampling otherwise."""
    key = (e, seed)
    hit = _zero_cache.get(key)
    if hit is not None:
        return hit
    verdict = _is_zero(e, seed)
    if len(_zero_cache) > 60_000:
        _zero_cache.clear()
    _zero_cache[key] = verdict
    return verdict


def _is_zero(e: Expr, seed: int) -> ZeroState:
    if isinstance(e, Num):
        return ZeroState.ZERO if e.value == 0 else ZeroState.NONZERO
    uni = Universe.of(e)
    had_atoms = bool(uni.atoms)
    try:
        n, _ = to_nf(e, uni)
        if n.is_zero:
            return ZeroState.ZERO
        if not had_atoms:
            return ZeroState.NONZERO
    except PolyOverflow:
        pass
    except EvalError:
        pass
    try:
        values = sample_values(e, seed)
    except EvalError:
        return ZeroState.PROBABLY_NONZERO
    if all(abs(float(v)) < ZERO_TOL for v in values):
        return ZeroState.PROBABLY_ZERO
    return ZeroState.PROBABLY_NONZERO


def is_zeroish(e: Expr, seed: int = 0) -> bool:
    return is_zero(e, seed) in ZEROISH


# -- equation cleanup ---------------------------------------------------------


def equation_numerator(e: Expr, keep=(), seed: int = 0):
    """Clear denominators and strip generically nonzero content factors.

    ``keep`` lists symbol names whose polynomial content must be preserved
    (the unknown and its derivative symbols); content over the remaining
    generators, monomial factors, and exp-atoms (never zero) are dropped.
    Returns (reduced expression, notes).
    """
    notes = []
    uni = Universe.of(e)
    try:
        n, d = to_nf(e, uni)
    except (PolyOverflow, EvalError):
        return e, notes
    if n.is_zero:
        return Num(Fraction(0)), notes
    if not d.is_constant:
        notes.append("cleared a nonzero denominator")
    keep_idx = set()
    for i in range(uni.size):
        g = uni.gen_expr(i)
        if isinstance(g, Sym) and g.name in keep:
            keep_idx.add(i)
        elif isinstance(g, (AppFn, FnDeriv)) and ("@" in getattr(g, "fn", "") or g.fn in keep):
            keep_idx.add(i)
        elif not isinstance(g, Sym) and any(name in keep for name in free_symbols(g)):
            keep_idx.add(i)
    # monomial content over droppable generators
    mono = list(n.min_exponents())
    for i in keep_idx:
        mono[i] = 0
    # exp atoms never vanish: drop them entirely even when kept symbols occur
    for i in range(uni.size):
        g = uni.gen_expr(i)
        if isinstance(g, Call) and g.head == "exp":
            mono[i] = min(x[i] for x in n.terms)
    if any(mono):
        n = n.shift_down(tuple(mono))
        notes.append("dropped a nonvanishing monomial factor")
    # monomial factors of kept generators (derivative symbols, the unknown)
    # may drop too: they are nonzero on the generic solution variety.  Guard:
    # the reduced equation must still mention at least one kept generator.
    kept_mono = [0] * uni.size
    for i in keep_idx:
        kept_mono[i] = min(x[i] for x in n.terms)
    if any(kept_mono):
        candidate = n.shift_down(tuple(kept_mono))
        if any(x[i] for x in candidate.terms for i in keep_idx):
            n = candidate
            notes.append("dropped a generically nonzero derivative factor")
    # polynomial content with respect to the kept generators
    if keep_idx and not n.is_constant:
        groups: dict = {}
        for ex, c in n.terms.items():
            kpart = tuple(x if i in keep_idx else 0 for i, x in enumerate(ex))
            rest = tuple(0 if i in keep_idx else x for i, x in enumerate(ex))
            groups.setdefault(kpart, {})[rest] = c
        if len(groups) > 1 or next(iter(groups)) != (0,) * uni.size:
            cont = None
            for bucket in groups.values():
                p = Poly(bucket, uni.size)
                cont = p if cont is None else poly_gcd(cont, p)
                if cont.is_constant:
                    break
            if cont is not None and not cont.is_constant:
                reduced = exact_div(n, cont)
                if reduced is not None:
                    n = reduced
                    notes.append("dropped a generically nonzero content factor")
    n = n.sign_normal()
    c = n.rational_content()
    if c not in (0, 1):
        n = n.scale(Fraction(1) / c)
    return nf_to_expr(n, uni), notes
