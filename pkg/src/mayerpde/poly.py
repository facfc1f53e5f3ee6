"""Sparse multivariate polynomials over exact rationals.

Supports the arithmetic needed by the rational normal form: addition,
multiplication, exact division, content/primitive decomposition, GCD via a
primitive polynomial remainder sequence, and perfect-square roots.  Monomial
comparisons use graded lexicographic order on the exponent tuples.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd as int_gcd
from typing import Optional


class PolyOverflow(Exception):
    """Raised when an intermediate polynomial exceeds the term budget."""


TERM_LIMIT = 200_000


def _grlex(exps):
    return (sum(exps), exps)


class Poly:
    __slots__ = ("terms", "nvars")

    def __init__(self, terms: dict, nvars: int):
        self.terms = terms
        self.nvars = nvars

    # -- construction ---------------------------------------------------

    @classmethod
    def const(cls, c, nvars: int) -> "Poly":
        c = Fraction(c)
        return cls({} if c == 0 else {(0,) * nvars: c}, nvars)

    @classmethod
    def variable(cls, i: int, nvars: int) -> "Poly":
        e = tuple(1 if j == i else 0 for j in range(nvars))
        return cls({e: Fraction(1)}, nvars)

    # -- predicates -------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_constant(self) -> bool:
        return all(all(x == 0 for x in e) for e in self.terms)

    def constant_value(self) -> Fraction:
        if self.is_zero:
            return Fraction(0)
        return next(iter(self.terms.values()))

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        if self.is_zero:
            return "Poly(0)"
        bits = [f"{c}*x^{e}" for e, c in sorted(self.terms.items())]
        return "Poly(" + " + ".join(bits) + ")"

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e)
            if s is None:
                out[e] = c
            else:
                s = s + c
                if s:
                    out[e] = s
                else:
                    del out[e]
        return Poly(out, self.nvars)

    def __neg__(self) -> "Poly":
        return Poly({e: -c for e, c in self.terms.items()}, self.nvars)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        if self.is_zero or other.is_zero:
            return Poly({}, self.nvars)
        if len(self.terms) * len(other.terms) > 4 * TERM_LIMIT:
            raise PolyOverflow
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(e)
                if s is None:
                    out[e] = c1 * c2
                else:
                    s = s + c1 * c2
                    if s:
                        out[e] = s
                    else:
                        del out[e]
        if len(out) > TERM_LIMIT:
            raise PolyOverflow
        return Poly(out, self.nvars)

    def scale(self, c: Fraction) -> "Poly":
        c = Fraction(c)
        if c == 0:
            return Poly({}, self.nvars)
        return Poly({e: c * v for e, v in self.terms.items()}, self.nvars)

    def pow_int(self, k: int) -> "Poly":
        if k < 0:
            raise ValueError("negative power of a polynomial")
        out = Poly.const(1, self.nvars)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    def eval(self, point: list) -> Fraction:
        total = Fraction(0)
        for e, c in self.terms.items():
            v = c
            for x, k in zip(point, e):
                if k:
                    v *= x**k
            total += v
        return total

    # -- structure --------------------------------------------------------

    def degree_in(self, i: int) -> int:
        return max((e[i] for e in self.terms), default=-1)

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def vars_present(self) -> list:
        out = []
        for i in range(self.nvars):
            if any(e[i] for e in self.terms):
                out.append(i)
        return out

    def leading(self):
        """(exponent, coefficient) of the graded-lex leading term."""
        e = max(self.terms, key=_grlex)
        return e, self.terms[e]

    def min_exponents(self) -> tuple:
        out = None
        for e in self.terms:
            out = e if out is None else tuple(min(a, b) for a, b in zip(out, e))
        return out or (0,) * self.nvars

    def shift_down(self, mono: tuple) -> "Poly":
        return Poly(
            {tuple(a - b for a, b in zip(e, mono)): c for e, c in self.terms.items()},
            self.nvars,
        )

    def rational_content(self) -> Fraction:
        """Positive rational c with self/c integer-primitive; 0 for the zero poly."""
        if self.is_zero:
            return Fraction(0)
        n = 0
        d = 1
        for c in self.terms.values():
            n = int_gcd(n, abs(c.numerator))
            d = d * c.denominator // int_gcd(d, c.denominator)
        return Fraction(n, d)

    def monic_normal(self) -> "Poly":
        """Scale so the graded-lex leading coefficient is 1."""
        if self.is_zero:
            return self
        _, c = self.leading()
        return self.scale(Fraction(1) / c)

    def sign_normal(self) -> "Poly":
        if self.is_zero:
            return self
        _, c = self.leading()
        return self.scale(-1) if c < 0 else self

    # -- per-variable views ------------------------------------------------

    def coeffs_in(self, i: int) -> dict:
        """View as a univariate poly in variable i: degree -> coefficient Poly."""
        out: dict = {}
        for e, c in self.terms.items():
            k = e[i]
            stripped = tuple(0 if j == i else x for j, x in enumerate(e))
            bucket = out.setdefault(k, {})
            bucket[stripped] = bucket.get(stripped, Fraction(0)) + c
        return {k: Poly({e: c for e, c in b.items() if c}, self.nvars) for k, b in out.items()}

    @staticmethod
    def from_coeffs(coeffs: dict, i: int, nvars: int) -> "Poly":
        out: dict = {}
        for k, p in coeffs.items():
            for e, c in p.terms.items():
                e2 = tuple(x + (k if j == i else 0) for j, x in enumerate(e))
                out[e2] = out.get(e2, Fraction(0)) + c
        return Poly({e: c for e, c in out.items() if c}, nvars)


# -- division ----------------------------------------------------------------


def exact_div(a: Poly, b: Poly) -> Optional[Poly]:
    """a / b when the division is exact, else None."""
    if b.is_zero:
        raise ZeroDivisionError("polynomial division by zero")
    if a.is_zero:
        return Poly({}, a.nvars)
    if b.is_constant:
        return a.scale(Fraction(1) / b.constant_value())
    quo: dict = {}
    rem = a
    eb, cb = b.leading()
    guard = 4 * (len(a.terms) + 1) * (len(b.terms) + 1) + 64
    while not rem.is_zero:
        guard -= 1
        if guard <= 0:
            return None
        er, cr = rem.leading()
        de = tuple(x - y for x, y in zip(er, eb))
        if any(x < 0 for x in de):
            return None
        q = cr / cb
        quo[de] = quo.get(de, Fraction(0)) + q
        rem = rem - b * Poly({de: q}, a.nvars)
    return Poly({e: c for e, c in quo.items() if c}, a.nvars)


def _prem(a: Poly, b: Poly, i: int):
    """Pseudo-remainder of a by b with respect to variable i."""
    da = a.degree_in(i)
    db = b.degree_in(i)
    bc = b.coeffs_in(i)
    lb = bc[db]
    r = a
    xi = Poly.variable(i, a.nvars)
    while not r.is_zero and r.degree_in(i) >= db:
        dr = r.degree_in(i)
        lr = r.coeffs_in(i)[dr]
        r = r * lb - b * lr * xi.pow_int(dr - db)
        if r.degree_in(i) >= dr and not r.is_zero:
            # no progress: numerical safety valve (should not happen)
            return None
    return r


def _content_in(a: Poly, i: int) -> Poly:
    cs = list(a.coeffs_in(i).values())
    g = cs[0]
    for c in cs[1:]:
        g = poly_gcd(g, c)
        if g.is_constant:
            break
    return g


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """GCD normalized to a positive-leading-coefficient primitive polynomial."""
    if a.is_zero and b.is_zero:
        return Poly({}, a.nvars)
    if a.is_zero:
        return _normalize_gcd(b)
    if b.is_zero:
        return _normalize_gcd(a)
    # split off monomial content first: cheap and very common here
    ma = a.min_exponents()
    mb = b.min_exponents()
    shared = tuple(min(x, y) for x, y in zip(ma, mb))
    a = a.shift_down(ma)
    b = b.shift_down(mb)
    g = _gcd_primitive(a, b)
    if any(shared):
        g = Poly({tuple(x + y for x, y in zip(e, shared)): c for e, c in g.terms.items()}, g.nvars)
    return _normalize_gcd(g)


def _normalize_gcd(p: Poly) -> Poly:
    if p.is_zero:
        return p
    c = p.rational_content()
    p = p.scale(Fraction(1) / c)
    return p.sign_normal()


def _gcd_primitive(a: Poly, b: Poly) -> Poly:
    if a.is_constant or b.is_constant:
        return Poly.const(1, a.nvars)
    if a == b:
        return a
    va = set(a.vars_present())
    vb = set(b.vars_present())
    common = sorted(va & vb)
    if not common:
        return Poly.const(1, a.nvars)
    # main variable: smallest combined degree keeps the PRS short
    i = min(common, key=lambda j: max(a.degree_in(j), b.degree_in(j)))
    ca = _content_in(a, i)
    cb = _content_in(b, i)
    pa = exact_div(a, ca)
    pb = exact_div(b, cb)
    if pa is None or pb is None:  # pragma: no cover
        return Poly.const(1, a.nvars)
    cont = poly_gcd(ca, cb)
    if pa.degree_in(i) < pb.degree_in(i):
        pa, pb = pb, pa
    while True:
        r = _prem(pa, pb, i)
        if r is None:
            return cont  # safety valve: fall back to the content factor
        if r.is_zero:
            break
        r = exact_div(r, _content_in(r, i))
        c = r.rational_content()
        r = r.scale(Fraction(1) / c).sign_normal()
        pa, pb = pb, r
        if pb.degree_in(i) == 0:
            return cont
    return cont * _normalize_gcd(pb)


def poly_sqrt(a: Poly) -> Optional[Poly]:
    """Exact square root of a perfect-square polynomial, else None."""
    if a.is_zero:
        return a
    if a.is_constant:
        c = a.constant_value()
        if c < 0:
            return None
        rn = _int_sqrt_exact(c.numerator)
        rd = _int_sqrt_exact(c.denominator)
        if rn is None or rd is None:
            return None
        return Poly.const(Fraction(rn, rd), a.nvars)
    ea, ca = a.leading()
    if any(x % 2 for x in ea) or ca < 0:
        return None
    rn = _int_sqrt_exact(ca.numerator)
    rd = _int_sqrt_exact(ca.denominator)
    if rn is None or rd is None:
        return None
    s = Poly({tuple(x // 2 for x in ea): Fraction(rn, rd)}, a.nvars)
    guard = len(a.terms) ** 2 + 16
    while True:
        guard -= 1
        if guard <= 0:
            return None
        r = a - s * s
        if r.is_zero:
            return s
        er, cr = r.leading()
        es, cs = s.leading()
        de = tuple(x - y for x, y in zip(er, es))
        if any(x < 0 for x in de):
            return None
        t = Poly({de: cr / (2 * cs)}, a.nvars)
        if _grlex(de) >= _grlex(es):
            return None
        s = s + t


def _int_sqrt_exact(n: int) -> Optional[int]:
    if n < 0:
        return None
    r = int(n**0.5)
    while r * r > n:
        r -= 1
    while (r + 1) * (r + 1) <= n:
        r += 1
    return r if r * r == n else None
