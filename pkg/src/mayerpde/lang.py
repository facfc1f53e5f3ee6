"""Concrete syntax: tokenizer, recursive-descent parser and printer.

The textual language covers integers, rationals written ``p/q``, identifiers,
``+ - * / ^`` with ``^`` binding tightest and right-associative, parentheses,
calls of ``sin cos exp log sqrt``, first derivatives of the unknown written
``d(f, x)``, and slot derivatives of generated functions ``d(C1, 1)(a, b)``.
Implicit multiplication is rejected.  ``render`` inverts ``parse_expr`` on
canonical trees.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Optional

from .expr import (
    Add,
    AppFn,
    Call,
    Expr,
    FnDeriv,
    Mul,
    Num,
    Pow,
    Sym,
    _coeff_term,
    add,
    appfn,
    call,
    fnderiv,
    mul,
    num,
    power,
    sym,
)

BUILTINS = ("sin", "cos", "exp", "log", "sqrt")


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t]+)|(?P<num>\d+)|(?P<ident>[A-Za-z][A-Za-z0-9_]*)|(?P<op>[-+*/^(),=])"
)


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


def _tokenize(text: str, line: int = 1, col0: int = 1):
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        out.append(_Token(m.lastgroup, m.group(), line, col0 + m.start()))
    out.append(_Token("eof", "", line, col0 + len(text)))
    return out


class ParseContext:
    """Declared names; when ``closed`` every identifier must be known."""

    def __init__(self, variables=(), unknown: Optional[str] = None, params=(),
                 functions: Optional[dict] = None, closed: bool = True):
        self.variables = list(variables)
        self.unknown = unknown
        self.params = list(params)
        self.functions = dict(functions or {})
        self.closed = closed

    def knows(self, name: str) -> bool:
        return (
            name in self.variables
            or name in self.params
            or name == self.unknown
            or name in self.functions
        )


OPEN_CONTEXT = ParseContext(closed=False)


def p_symbol(unknown: str, var: str) -> Sym:
    """Reserved symbol carrying the first derivative of ``unknown`` by ``var``."""
    return sym(f"{unknown}@{var}")


class _Parser:
    def __init__(self, tokens, ctx: ParseContext):
        self.toks = tokens
        self.i = 0
        self.ctx = ctx

    def peek(self) -> _Token:
        return self.toks[self.i]

    def take(self, kind=None, text=None) -> _Token:
        t = self.toks[self.i]
        if (kind and t.kind != kind) or (text and t.text != text):
            expected = text or kind
            raise ParseError(f"expected {expected!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        self.i += 1
        return t

    def at_op(self, text) -> bool:
        t = self.peek()
        return t.kind == "op" and t.text == text

    # expr := term (('+'|'-') term)*
    def expr(self) -> Expr:
        e = self.term()
        while self.at_op("+") or self.at_op("-"):
            op = self.take("op").text
            rhs = self.term()
            e = add(e, rhs if op == "+" else mul(num(-1), rhs))
        return e

    # term := unary (('*'|'/') unary)*
    def term(self) -> Expr:
        e = self.unary()
        while self.at_op("*") or self.at_op("/"):
            op = self.take("op").text
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else mul(e, power(rhs, num(-1)))
        return e

    # unary := '-' unary | pow ;  pow := postfix ('^' unary)?
    def unary(self) -> Expr:
        if self.at_op("-"):
            self.take("op")
            return mul(num(-1), self.unary())
        e = self.postfix()
        if self.at_op("^"):
            self.take("op")
            return power(e, self.unary())
        return e

    def postfix(self) -> Expr:
        e = self.atom()
        while self.at_op("(") and isinstance(e, _DerivHead):
            args = self.arglist()
            if len(args) != self.ctx.functions.get(e.fn, len(args)):
                t = self.peek()
                raise ParseError(f"wrong argument count for {e.fn}", t.line, t.col)
            orders = [0] * len(args)
            for s in e.slots:
                if not 1 <= s <= len(args):
                    t = self.peek()
                    raise ParseError(f"slot {s} out of range for {e.fn}", t.line, t.col)
                orders[s - 1] += 1
            e = fnderiv(e.fn, orders, *args)
        if isinstance(e, _DerivHead):
            t = self.peek()
            raise ParseError(f"derivative of {e.fn} must be applied to arguments", t.line, t.col)
        return e

    def arglist(self):
        self.take("op", "(")
        args = [self.expr()]
        while self.at_op(","):
            self.take("op")
            args.append(self.expr())
        self.take("op", ")")
        return args

    def atom(self) -> Expr:
        t = self.peek()
        if t.kind == "num":
            self.take()
            return num(int(t.text))
        if t.kind == "op" and t.text == "(":
            self.take()
            e = self.expr()
            self.take("op", ")")
            return e
        if t.kind == "ident":
            self.take()
            name = t.text
            if name == "d":
                return self.derivative(t)
            if self.at_op("("):
                if name in BUILTINS:
                    args = self.arglist()
                    if len(args) != 1:
                        raise ParseError(f"{name} takes one argument", t.line, t.col)
                    return call(name, args[0])
                args = self.arglist()
                arity = self.ctx.functions.get(name)
                if arity is None and self.ctx.closed:
                    raise ParseError(f"unknown function {name!r}", t.line, t.col)
                if arity is not None and arity != len(args):
                    raise ParseError(f"wrong argument count for {name}", t.line, t.col)
                return appfn(name, *args)
            if self.ctx.closed and not self.ctx.knows(name):
                raise ParseError(f"unknown identifier {name!r}", t.line, t.col)
            return sym(name)
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.line, t.col)

    def derivative(self, t: _Token) -> Expr:
        args = self.arglist()
        if len(args) < 2:
            raise ParseError("d(...) needs a function and a variable or slot", t.line, t.col)
        head = args[0]
        if isinstance(head, Sym) and head.name == self.ctx.unknown:
            if len(args) != 2 or not isinstance(args[1], Sym) or args[1].name not in self.ctx.variables:
                raise ParseError("d(unknown, var) needs a declared variable", t.line, t.col)
            return p_symbol(head.name, args[1].name)
        fn = None
        if isinstance(head, Sym):
            fn = head.name
        elif isinstance(head, AppFn) and not head.args:
            fn = head.fn
        if fn is None:
            raise ParseError("d(...) needs a function name first", t.line, t.col)
        slots = []
        for a in args[1:]:
            if not (isinstance(a, Num) and a.value.denominator == 1 and a.value > 0):
                raise ParseError("slot indices must be positive integers", t.line, t.col)
            slots.append(int(a.value))
        return _DerivHead(fn, tuple(slots))


class _DerivHead(Expr):
    """Parser-internal marker for ``d(C, slots...)`` awaiting its arguments."""

    __slots__ = ("fn", "slots")

    def __init__(self, fn, slots):
        super().__init__()
        self.fn = fn
        self.slots = slots


def parse_expr(text: str, ctx: ParseContext = OPEN_CONTEXT, line: int = 1) -> Expr:
    p = _Parser(_tokenize(text, line=line), ctx)
    e = p.expr()
    t = p.peek()
    if t.kind != "eof":
        raise ParseError(f"unexpected {t.text!r}", t.line, t.col)
    return e


# -- printing -----------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4


class PrintContext:
    """Optional mapping from derivative symbols back to d(f, x) syntax."""

    def __init__(self, p_names: Optional[dict] = None):
        self.p_names = p_names or {}

    @classmethod
    def for_system(cls, unknown: str, variables) -> "PrintContext":
        return cls({f"{unknown}@{v}": (unknown, v) for v in variables})


def render(e: Expr, ctx: Optional[PrintContext] = None) -> str:
    return _render(e, _PREC_ADD, ctx or PrintContext())


def _frac_str(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


def _render(e: Expr, prec: int, ctx: PrintContext) -> str:
    if isinstance(e, Num):
        s = _frac_str(abs(e.value))
        if e.value < 0:
            s = "-" + s
            return f"({s})" if prec >= _PREC_MUL else s
        if e.value.denominator != 1 and prec >= _PREC_MUL:
            return f"({s})"
        return s
    if isinstance(e, Sym):
        mapped = ctx.p_names.get(e.name)
        if mapped:
            return f"d({mapped[0]}, {mapped[1]})"
        return e.name
    if isinstance(e, Add):
        parts = [_render(e.args[0], _PREC_ADD, ctx)]
        for t in e.args[1:]:
            c, _ = _coeff_term(t)
            if c < 0:
                parts.append(" - " + _render(mul(num(-1), t), _PREC_MUL, ctx))
            else:
                parts.append(" + " + _render(t, _PREC_ADD, ctx))
        s = "".join(parts)
        return f"({s})" if prec > _PREC_ADD else s
    if isinstance(e, (Mul, Pow)):
        return _render_product(e, prec, ctx)
    if isinstance(e, Call):
        return f"{e.head}({_render(e.args[0], _PREC_ADD, ctx)})"
    if isinstance(e, AppFn):
        inner = ", ".join(_render(a, _PREC_ADD, ctx) for a in e.args)
        return f"{e.fn}({inner})"
    if isinstance(e, FnDeriv):
        slots = ", ".join(str(j + 1) for j, o in enumerate(e.orders) for _ in range(o))
        inner = ", ".join(_render(a, _PREC_ADD, ctx) for a in e.args)
        return f"d({e.fn}, {slots})({inner})"
    raise TypeError(f"not an Expr: {e!r}")


def _render_power(base: Expr, exp: Fraction, ctx: PrintContext) -> str:
    # exp is positive here
    if exp == Fraction(1, 2):
        return f"sqrt({_render(base, _PREC_ADD, ctx)})"
    b = _render(base, _PREC_POW + 1, ctx)
    if isinstance(base, (Pow,)):
        b = f"({_render(base, _PREC_ADD, ctx)})"
    if exp == 1:
        return b
    if exp.denominator == 1:
        return f"{b}^{exp.numerator}"
    return f"{b}^({_frac_str(exp)})"


def _render_product(e: Expr, prec: int, ctx: PrintContext) -> str:
    factors = e.args if isinstance(e, Mul) else (e,)
    coeff = Fraction(1)
    num_parts = []
    den_parts = []
    for f in factors:
        if isinstance(f, Num):
            coeff *= f.value
            continue
        base, exp = (f.base, f.exponent) if isinstance(f, Pow) else (f, None)
        if exp is not None and isinstance(exp, Num):
            ev = exp.value
            if ev < 0:
                den_parts.append(_render_power(base, -ev, ctx))
                continue
            num_parts.append(_render_power(base, ev, ctx))
            continue
        if exp is not None:
            b = _render(base, _PREC_POW + 1, ctx)
            if isinstance(base, Pow):
                b = f"({_render(base, _PREC_ADD, ctx)})"
            num_parts.append(f"{b}^{_render_exp(exp, ctx)}")
            continue
        num_parts.append(_render(f, _PREC_MUL + (1 if isinstance(f, Add) else 0), ctx))
    sign = "-" if coeff < 0 else ""
    coeff = abs(coeff)
    if coeff.numerator != 1 or not num_parts:
        num_parts.insert(0, str(coeff.numerator))
    if coeff.denominator != 1:
        den_parts.insert(0, str(coeff.denominator))
    s = "*".join(num_parts)
    for d in den_parts:
        safe = f"({d})" if any(c in d for c in "*+-/ ") else d
        s += f"/{safe}"
    s = sign + s
    if sign and prec >= _PREC_MUL:
        return f"({s})"
    if prec > _PREC_MUL and len(num_parts) + len(den_parts) > 1:
        return f"({s})"
    return s


def _render_exp(exp: Expr, ctx: PrintContext) -> str:
    if isinstance(exp, Sym):
        return exp.name
    return f"({_render(exp, _PREC_ADD, ctx)})"


def render_latex(e: Expr, ctx: Optional[PrintContext] = None) -> str:
    """Compact LaTeX form of an expression (presentation only)."""
    ctx = ctx or PrintContext()

    def pw(base: Expr, exp: Expr) -> str:
        if isinstance(exp, Num) and exp.value == Fraction(1, 2):
            return f"\\sqrt{{{go(base, _PREC_ADD)}}}"
        return f"{{{go(base, _PREC_ATOM)}}}^{{{go(exp, _PREC_ADD)}}}"

    def go(x: Expr, prec: int) -> str:
        if isinstance(x, Num):
            if x.value.denominator != 1:
                sign = "-" if x.value < 0 else ""
                s = f"{sign}\\frac{{{abs(x.value.numerator)}}}{{{x.value.denominator}}}"
            else:
                s = str(x.value.numerator)
            return f"\\left({s}\\right)" if x.value < 0 and prec >= _PREC_MUL else s
        if isinstance(x, Sym):
            mapped = ctx.p_names.get(x.name)
            if mapped:
                return f"\\partial_{{{mapped[1]}}} {mapped[0]}"
            return x.name
        if isinstance(x, Add):
            parts = [go(x.args[0], _PREC_ADD)]
            for t in x.args[1:]:
                c, _ = _coeff_term(t)
                if c < 0:
                    parts.append(" - " + go(mul(num(-1), t), _PREC_MUL))
                else:
                    parts.append(" + " + go(t, _PREC_ADD))
            s = "".join(parts)
            return f"\\left({s}\\right)" if prec > _PREC_ADD else s
        if isinstance(x, (Mul, Pow)):
            factors = x.args if isinstance(x, Mul) else (x,)
            top, bottom = [], []
            coeff = Fraction(1)
            for f in factors:
                if isinstance(f, Num):
                    coeff *= f.value
                    continue
                if isinstance(f, Pow):
                    exp = f.exponent
                    if isinstance(exp, Num) and exp.value < 0:
                        ie = Num(-exp.value)
                        bottom.append(go(f.base, _PREC_MUL) if ie.value == 1 else pw(f.base, ie))
                    else:
                        top.append(pw(f.base, exp))
                    continue
                top.append(go(f, _PREC_MUL + (1 if isinstance(f, Add) else 0)))
            sign = "-" if coeff < 0 else ""
            coeff = abs(coeff)
            if coeff.numerator != 1 or not top:
                top.insert(0, str(coeff.numerator))
            if coeff.denominator != 1:
                bottom.insert(0, str(coeff.denominator))
            ts = " ".join(top)
            if bottom:
                return f"{sign}\\frac{{{ts}}}{{{' '.join(bottom)}}}"
            s = sign + ts
            return f"\\left({s}\\right)" if sign and prec >= _PREC_MUL else s
        if isinstance(x, Call):
            names = {"exp": "\\exp", "log": "\\log", "sin": "\\sin", "cos": "\\cos"}
            return f"{names[x.head]}\\left({go(x.args[0], _PREC_ADD)}\\right)"
        if isinstance(x, AppFn):
            inner = ", ".join(go(a, _PREC_ADD) for a in x.args)
            return f"{x.fn}\\left({inner}\\right)"
        if isinstance(x, FnDeriv):
            slots = "".join(str(j + 1) * o for j, o in enumerate(x.orders))
            inner = ", ".join(go(a, _PREC_ADD) for a in x.args)
            return f"{x.fn}^{{({slots})}}\\left({inner}\\right)"
        raise TypeError(f"not an Expr: {x!r}")

    return go(e, _PREC_ADD)
