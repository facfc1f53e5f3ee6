"""Immutable symbolic expression trees with canonical forms.

Nodes are built through the module-level constructors (``num``, ``sym``,
``add``, ``mul``, ``power``, ``call``, ``appfn``, ``fnderiv``), which keep
every tree in a canonical shape: sums and products are flattened and sorted
under a fixed total order, rational constants are exact and folded, like
terms and like bases are combined, and a handful of formal rewrite rules
(exp/log interplay, power merging) are applied.  Structural equality on
canonical trees is therefore semantic equality for the rewrite system.

Roots, logs and exponentials are treated formally: no branch cuts, and
``(x^a)^b`` merges whenever both exponents are rational.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Optional


class ExprError(Exception):
    """Raised for structurally invalid operations (division by zero, arity)."""


class EvalError(ExprError):
    """Raised when numeric evaluation is impossible at a point."""


ELEMENTARY = ("exp", "log", "sin", "cos")


class Expr:
    __slots__ = ("_key", "_hash", "_free", "_count")

    def __init__(self):
        self._key = None
        self._hash = None
        self._free = None
        self._count = None

    # -- equality / ordering ------------------------------------------------

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        return sort_key(self) == sort_key(other)

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(sort_key(self))
        return self._hash

    # -- arithmetic sugar ---------------------------------------------------

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return add(self, mul(_NEG_ONE, _coerce(other)))

    def __rsub__(self, other):
        return add(_coerce(other), mul(_NEG_ONE, self))

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return mul(self, power(_coerce(other), _NEG_ONE))

    def __rtruediv__(self, other):
        return mul(_coerce(other), power(self, _NEG_ONE))

    def __pow__(self, other):
        return power(self, _coerce(other))

    def __neg__(self):
        return mul(_NEG_ONE, self)

    def __repr__(self):
        from .lang import render

        return render(self)


class Num(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Fraction):
        super().__init__()
        self.value = value


class Sym(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        super().__init__()
        self.name = name


class Add(Expr):
    __slots__ = ("args",)

    def __init__(self, args: tuple):
        super().__init__()
        self.args = args


class Mul(Expr):
    __slots__ = ("args",)

    def __init__(self, args: tuple):
        super().__init__()
        self.args = args


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: Expr):
        super().__init__()
        self.base = base
        self.exponent = exponent


class Call(Expr):
    """Application of one of the elementary heads in ELEMENTARY."""

    __slots__ = ("head", "args")

    def __init__(self, head: str, args: tuple):
        super().__init__()
        self.head = head
        self.args = args


class AppFn(Expr):
    """Application of an arbitrary (unknown) function to argument expressions."""

    __slots__ = ("fn", "args")

    def __init__(self, fn: str, args: tuple):
        super().__init__()
        self.fn = fn
        self.args = args


class FnDeriv(Expr):
    """Slot derivative of an arbitrary function, evaluated at ``args``.

    ``orders[j]`` is the derivative order with respect to slot ``j``;
    the multi-index always has the function's arity as its length.
    """

    __slots__ = ("fn", "orders", "args")

    def __init__(self, fn: str, orders: tuple, args: tuple):
        super().__init__()
        self.fn = fn
        self.orders = orders
        self.args = args


# -- total order on nodes ---------------------------------------------------
# constants < symbols < powers < products < sums < function applications

_RANK = {Num: 0, Sym: 1, Pow: 2, Mul: 3, Add: 4, Call: 5, AppFn: 6, FnDeriv: 7}


def sort_key(e: Expr):
    k = e._key
    if k is not None:
        return k
    if isinstance(e, Num):
        k = (0, e.value)
    elif isinstance(e, Sym):
        k = (1, e.name)
    elif isinstance(e, Pow):
        k = (2, sort_key(e.base), sort_key(e.exponent))
    elif isinstance(e, Mul):
        k = (3, tuple(sort_key(a) for a in e.args))
    elif isinstance(e, Add):
        k = (4, tuple(sort_key(a) for a in e.args))
    elif isinstance(e, Call):
        k = (5, e.head, tuple(sort_key(a) for a in e.args))
    elif isinstance(e, AppFn):
        k = (6, e.fn, tuple(sort_key(a) for a in e.args))
    elif isinstance(e, FnDeriv):
        k = (7, e.fn, e.orders, tuple(sort_key(a) for a in e.args))
    else:  # pragma: no cover
        raise TypeError(f"not an Expr: {e!r}")
    e._key = k
    return k


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Num(Fraction(x))
    raise TypeError(f"cannot use {x!r} as an expression")


# -- constructors -----------------------------------------------------------


def num(v) -> Num:
    """Exact rational constant (always lowest terms, positive denominator)."""
    return Num(Fraction(v))


def sym(name: str) -> Sym:
    return Sym(name)


def syms(names: str) -> list:
    return [Sym(n) for n in names.replace(",", " ").split()]


ZERO = Num(Fraction(0))
ONE = Num(Fraction(1))
_NEG_ONE = Num(Fraction(-1))
HALF = Num(Fraction(1, 2))


def _coeff_term(t: Expr):
    """Split a canonical term into (rational coefficient, rest-or-None)."""
    if isinstance(t, Num):
        return t.value, None
    if isinstance(t, Mul) and isinstance(t.args[0], Num):
        rest = t.args[1:]
        return t.args[0].value, (rest[0] if len(rest) == 1 else Mul(rest))
    return Fraction(1), t


def _scaled(rest: Expr, c: Fraction) -> Expr:
    # rest is canonical and never carries a leading Num
    if c == 1:
        return rest
    if isinstance(rest, Mul):
        return Mul((Num(c),) + rest.args)
    return Mul((Num(c), rest))


def add(*terms) -> Expr:
    flat = []
    for t in terms:
        t = _coerce(t)
        if isinstance(t, Add):
            flat.extend(t.args)
        else:
            flat.append(t)
    const = Fraction(0)
    buckets: dict = {}
    for t in flat:
        c, rest = _coeff_term(t)
        if rest is None:
            const += c
        else:
            buckets[rest] = buckets.get(rest, Fraction(0)) + c
    out = [_scaled(rest, c) for rest, c in buckets.items() if c != 0]
    if const != 0 or not out:
        out.append(Num(const))
    if len(out) == 1:
        return out[0]
    out.sort(key=sort_key)
    return Add(tuple(out))


def mul(*factors) -> Expr:
    queue = [_coerce(f) for f in factors]
    coeff = Fraction(1)
    powers: dict = {}
    exp_args = []  # accumulated arguments of exp-factors
    while queue:
        f = queue.pop(0)
        if isinstance(f, Mul):
            queue[:0] = list(f.args)
            continue
        if isinstance(f, Num):
            coeff *= f.value
            if coeff == 0:
                return ZERO
            continue
        if isinstance(f, Call) and f.head == "exp":
            exp_args.append(f.args[0])
            continue
        if isinstance(f, Pow):
            b, e = f.base, f.exponent
        else:
            b, e = f, ONE
        if b in powers:
            powers[b].append(e)
        else:
            powers[b] = [e]
    out = []
    for b, es in powers.items():
        e = es[0] if len(es) == 1 else add(*es)
        p = power(b, e)
        if isinstance(p, Num):
            coeff *= p.value
            if coeff == 0:
                return ZERO
        elif isinstance(p, Mul) or (isinstance(p, Call) and p.head == "exp"):
            queue.append(p)  # re-process decomposed results
        else:
            out.append(p)
    if queue:
        return mul(Num(coeff), *(out + queue + [call("exp", a) for a in exp_args]))
    if exp_args:
        ex = call("exp", add(*exp_args))
        if isinstance(ex, Call) and ex.head == "exp":
            out.append(ex)
        elif isinstance(ex, Num):
            coeff *= ex.value
        else:
            return mul(Num(coeff), ex, *out)
    if coeff == 0:
        return ZERO
    if coeff != 1 and len(out) == 1 and isinstance(out[0], Add):
        # rational constants distribute over sums
        return add(*[mul(Num(coeff), t) for t in out[0].args])
    if coeff != 1 or not out:
        out.append(Num(coeff))
    if len(out) == 1:
        return out[0]
    out.sort(key=sort_key)
    return Mul(tuple(out))


def _int_nth_root(n: int, k: int) -> Optional[int]:
    if n < 0:
        return None
    if n in (0, 1):
        return n
    lo, hi = 0, 1
    while hi**k <= n:
        hi *= 2
    while lo < hi - 1:
        mid = (lo + hi) // 2
        if mid**k <= n:
            lo = mid
        else:
            hi = mid
    return lo if lo**k == n else None


def _rational_power(b: Fraction, e: Fraction) -> Optional[Fraction]:
    """b**e as an exact rational, or None when no exact value exists."""
    if e.denominator == 1:
        if b == 0 and e < 0:
            raise ExprError("division by zero")
        return b**e.numerator
    q = e.denominator
    neg = b < 0
    if neg and q % 2 == 0:
        return None
    rn = _int_nth_root(abs(b.numerator), q)
    rd = _int_nth_root(abs(b.denominator), q)
    if rn is None or rd is None:
        return None
    root = Fraction(-rn if neg else rn, rd)
    if root == 0 and e < 0:
        raise ExprError("division by zero")
    return root**e.numerator


def power(base, exponent) -> Expr:
    b = _coerce(base)
    e = _coerce(exponent)
    if isinstance(e, Num):
        ev = e.value
        if ev == 0:
            return ONE
        if ev == 1:
            return b
        if isinstance(b, Num):
            if b.value == 0:
                if ev < 0:
                    raise ExprError("division by zero")
                return ZERO
            r = _rational_power(b.value, ev)
            if r is not None:
                return Num(r)
            return Pow(b, e)
        if isinstance(b, Mul):
            # distribute formally, but never split a negative constant
            # under a fractional exponent (no imaginary factors)
            c, _ = _coeff_term(b)
            if ev.denominator == 1 or c >= 0:
                return mul(*[power(f, e) for f in b.args])
            return Pow(b, e)
        if isinstance(b, Pow) and isinstance(b.exponent, Num):
            return power(b.base, Num(b.exponent.value * ev))
        if isinstance(b, Call) and b.head == "exp":
            return call("exp", mul(e, b.args[0]))
        return Pow(b, e)
    if isinstance(b, Call) and b.head == "exp":
        return call("exp", mul(e, b.args[0]))
    if isinstance(b, Num) and b.value == 1:
        return ONE
    return Pow(b, e)


def _log_of(a: Expr) -> Expr:
    if isinstance(a, Num):
        if a.value == 1:
            return ZERO
        if a.value <= 0:
            raise ExprError("log of a non-positive constant")
        return Call("log", (a,))
    if isinstance(a, Call) and a.head == "exp":
        return a.args[0]
    if isinstance(a, Pow) and isinstance(a.exponent, Num):
        return mul(a.exponent, _log_of(a.base))
    if isinstance(a, Mul):
        c, rest = _coeff_term(a)
        if c > 0:
            parts = [_log_of(f) for f in (rest.args if isinstance(rest, Mul) else (rest,))]
            if c != 1:
                parts.append(Call("log", (Num(c),)))
            return add(*parts)
    return Call("log", (a,))


def _exp_build(a: Expr) -> Expr:
    """exp(a) with rational multiples of logarithms extracted as powers.

    Products never carry more than one exp factor (mul merges them), so the
    canonical form of ``exp(x + 3*log(y))`` is ``y^3 * exp(x)``.
    """
    if isinstance(a, Num) and a.value == 0:
        return ONE
    terms = a.args if isinstance(a, Add) else (a,)
    factors = []
    rest = []
    for t in terms:
        c, r = _coeff_term(t)
        if r is not None and isinstance(r, Call) and r.head == "log":
            factors.append(power(r.args[0], Num(c)))
        else:
            rest.append(t)
    if not factors:
        return Call("exp", (a,))
    if rest:
        factors.append(Call("exp", (add(*rest),)))
    return mul(*factors)


def call(head: str, *args) -> Expr:
    args = tuple(_coerce(a) for a in args)
    if head == "sqrt":
        return power(args[0], HALF)
    if head not in ELEMENTARY:
        raise ExprError(f"unknown function head {head!r}")
    (a,) = args
    if head == "exp":
        return _exp_build(a)
    if head == "log":
        return _log_of(a)
    # sin / cos: fold the zero argument and normalize parity
    if isinstance(a, Num) and a.value == 0:
        return ZERO if head == "sin" else ONE
    na = _negated(a)
    if sort_key(na) < sort_key(a):
        inner = Call(head, (na,))
        return mul(_NEG_ONE, inner) if head == "sin" else inner
    return Call(head, (a,))


def _negated(a: Expr) -> Expr:
    """-a with the sign pushed through sums (for parity comparisons)."""
    if isinstance(a, Add):
        return add(*[mul(_NEG_ONE, t) for t in a.args])
    return mul(_NEG_ONE, a)


def appfn(fn: str, *args) -> AppFn:
    return AppFn(fn, tuple(_coerce(a) for a in args))


def fnderiv(fn: str, orders: Iterable[int], *args) -> Expr:
    orders = tuple(int(o) for o in orders)
    args = tuple(_coerce(a) for a in args)
    if len(orders) != len(args):
        raise ExprError("slot-derivative multi-index does not match arity")
    if any(o < 0 for o in orders):
        raise ExprError("negative derivative order")
    if all(o == 0 for o in orders):
        return AppFn(fn, args)
    return FnDeriv(fn, orders, args)


def sqrt(a) -> Expr:
    return power(a, HALF)


# -- traversal --------------------------------------------------------------


def children(e: Expr) -> tuple:
    if isinstance(e, (Add, Mul, Call, AppFn, FnDeriv)):
        return e.args
    if isinstance(e, Pow):
        return (e.base, e.exponent)
    return ()


def free_symbols(e: Expr) -> frozenset:
    """Names of all symbols occurring in the tree."""
    if e._free is not None:
        return e._free
    if isinstance(e, Sym):
        out = frozenset((e.name,))
    else:
        out = frozenset().union(*(free_symbols(c) for c in children(e))) if children(e) else frozenset()
    e._free = out
    return out


def has_symbol(e: Expr, name: str) -> bool:
    return name in free_symbols(e)


def arb_functions(e: Expr) -> dict:
    """Mapping fn-name -> arity for every arbitrary function in the tree."""
    out: dict = {}

    def walk(x):
        if isinstance(x, (AppFn, FnDeriv)):
            seen = out.get(x.fn)
            if seen is not None and seen != len(x.args):
                raise ExprError(f"inconsistent arity for {x.fn}")
            out[x.fn] = len(x.args)
        for c in children(x):
            walk(c)

    walk(e)
    return out


def node_count(e: Expr) -> int:
    if e._count is None:
        e._count = 1 + sum(node_count(c) for c in children(e))
    return e._count


def normalize(e: Expr) -> Expr:
    """Rebuild a tree bottom-up through the canonical constructors."""
    if isinstance(e, (Num, Sym)):
        return e
    if isinstance(e, Add):
        return add(*[normalize(a) for a in e.args])
    if isinstance(e, Mul):
        return mul(*[normalize(a) for a in e.args])
    if isinstance(e, Pow):
        return power(normalize(e.base), normalize(e.exponent))
    if isinstance(e, Call):
        return call(e.head, *[normalize(a) for a in e.args])
    if isinstance(e, AppFn):
        return appfn(e.fn, *[normalize(a) for a in e.args])
    if isinstance(e, FnDeriv):
        return fnderiv(e.fn, e.orders, *[normalize(a) for a in e.args])
    raise TypeError(f"not an Expr: {e!r}")


# -- differentiation --------------------------------------------------------


def differentiate(e: Expr, s: Sym) -> Expr:
    """Partial derivative with the chain rule through all function nodes."""
    name = s.name
    if not has_symbol(e, name):
        return ZERO
    if isinstance(e, Sym):
        return ONE
    if isinstance(e, Add):
        return add(*[differentiate(a, s) for a in e.args])
    if isinstance(e, Mul):
        terms = []
        for i, f in enumerate(e.args):
            df = differentiate(f, s)
            if df != ZERO:
                terms.append(mul(*e.args[:i], df, *e.args[i + 1 :]))
        return add(*terms)
    if isinstance(e, Pow):
        b, x = e.base, e.exponent
        parts = []
        db = differentiate(b, s)
        if db != ZERO:
            parts.append(mul(x, power(b, add(x, _NEG_ONE)), db))
        dx = differentiate(x, s)
        if dx != ZERO:
            parts.append(mul(call("log", b), power(b, x), dx))
        return add(*parts)
    if isinstance(e, Call):
        a = e.args[0]
        da = differentiate(a, s)
        outer = {
            "exp": lambda: e,
            "log": lambda: power(a, _NEG_ONE),
            "sin": lambda: call("cos", a),
            "cos": lambda: mul(_NEG_ONE, call("sin", a)),
        }[e.head]()
        return mul(outer, da)
    if isinstance(e, AppFn):
        terms = []
        for j, a in enumerate(e.args):
            da = differentiate(a, s)
            if da != ZERO:
                unit = tuple(1 if i == j else 0 for i in range(len(e.args)))
                terms.append(mul(FnDeriv(e.fn, unit, e.args), da))
        return add(*terms)
    if isinstance(e, FnDeriv):
        terms = []
        for j, a in enumerate(e.args):
            da = differentiate(a, s)
            if da != ZERO:
                bumped = tuple(o + (1 if i == j else 0) for i, o in enumerate(e.orders))
                terms.append(mul(FnDeriv(e.fn, bumped, e.args), da))
        return add(*terms)
    raise TypeError(f"not an Expr: {e!r}")


# -- substitution -----------------------------------------------------------


class FnRule:
    """A concrete body for an arbitrary function: slots bound to ``params``."""

    __slots__ = ("params", "body")

    def __init__(self, params: tuple, body: Expr):
        self.params = tuple(params)
        self.body = body

    @property
    def arity(self) -> int:
        return len(self.params)

    def applied(self, args, orders=None) -> Expr:
        if len(args) != len(self.params):
            raise ExprError("arity mismatch in function substitution")
        body = self.body
        if orders is not None:
            # differentiate with respect to the slots before instantiating them
            for p, o in zip(self.params, orders):
                for _ in range(o):
                    body = differentiate(body, p)
        return substitute(body, {p.name: a for p, a in zip(self.params, args)})


def substitute(e: Expr, mapping: dict = None, fn_mapping: dict = None) -> Expr:
    """Simultaneous substitution of symbols and arbitrary-function bodies."""
    mapping = mapping or {}
    fn_mapping = fn_mapping or {}
    coerced = {k: _coerce(v) for k, v in mapping.items()}

    def walk(x: Expr) -> Expr:
        if isinstance(x, Num):
            return x
        if isinstance(x, Sym):
            return coerced.get(x.name, x)
        if not any(n in free_symbols(x) for n in coerced) and not (
            fn_mapping and _mentions_fn(x, fn_mapping)
        ):
            return x
        if isinstance(x, Add):
            return add(*[walk(a) for a in x.args])
        if isinstance(x, Mul):
            return mul(*[walk(a) for a in x.args])
        if isinstance(x, Pow):
            return power(walk(x.base), walk(x.exponent))
        if isinstance(x, Call):
            return call(x.head, *[walk(a) for a in x.args])
        if isinstance(x, AppFn):
            new_args = [walk(a) for a in x.args]
            rule = fn_mapping.get(x.fn)
            if rule is None:
                return appfn(x.fn, *new_args)
            return rule.applied(new_args)
        if isinstance(x, FnDeriv):
            new_args = [walk(a) for a in x.args]
            rule = fn_mapping.get(x.fn)
            if rule is None:
                return fnderiv(x.fn, x.orders, *new_args)
            return rule.applied(new_args, orders=x.orders)
        raise TypeError(f"not an Expr: {x!r}")

    return walk(e)


def _mentions_fn(e: Expr, fn_mapping: dict) -> bool:
    if isinstance(e, (AppFn, FnDeriv)) and e.fn in fn_mapping:
        return True
    return any(_mentions_fn(c, fn_mapping) for c in children(e))


def replace_nodes(e: Expr, table: dict) -> Expr:
    """Top-down structural replacement of whole subtrees."""
    hit = table.get(e)
    if hit is not None:
        return hit
    if isinstance(e, (Num, Sym)):
        return e
    if isinstance(e, Add):
        return add(*[replace_nodes(a, table) for a in e.args])
    if isinstance(e, Mul):
        return mul(*[replace_nodes(a, table) for a in e.args])
    if isinstance(e, Pow):
        return power(replace_nodes(e.base, table), replace_nodes(e.exponent, table))
    if isinstance(e, Call):
        return call(e.head, *[replace_nodes(a, table) for a in e.args])
    if isinstance(e, AppFn):
        return appfn(e.fn, *[replace_nodes(a, table) for a in e.args])
    if isinstance(e, FnDeriv):
        return fnderiv(e.fn, e.orders, *[replace_nodes(a, table) for a in e.args])
    raise TypeError(f"not an Expr: {e!r}")
