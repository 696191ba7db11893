"""Expression trees over the time variable ``t``.

Coefficients of the system are written in a small infix language and held as
immutable trees. Trees can be parsed, printed, differentiated, simplified and
evaluated in complex arithmetic (scalars or numpy arrays).

Grammar (``^`` binds tighter than unary minus, binary operators are
left-associative, ``^`` is right-associative)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := base ('^' unary)?
    base     := number | 'i' | 'pi' | 't' | func '(' expr ')' | '(' expr ')'
    func     := 'exp' | 'ln' | 'sin' | 'cos' | 'sqrt'
"""

from __future__ import annotations

import cmath
import math
import re
from fractions import Fraction
from typing import Callable, Iterator, Union

import numpy as np

Number = Union[int, float, complex]
Exponent = Union[Fraction, float]


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    """Syntax error at a byte offset of the source text."""

    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        self.offset = offset
        self.expected = expected
        detail = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownIdentifierError(ParseError):
    pass


class EvaluationError(ExprError):
    """A subtree produced a non-finite value."""

    def __init__(self, node: "Expr", t: float):
        self.node = node
        self.t = t
        super().__init__(f"non-finite value of {to_string(node)} at t={t!r}")


# ---------------------------------------------------------------------------
# nodes


class Expr:
    __slots__ = ("_hash",)

    def children(self) -> tuple["Expr", ...]:
        return ()

    def _key(self) -> tuple:
        return self.children()

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def _init_hash(self) -> None:
        object.__setattr__(self, "_hash", hash((type(self).__name__, self._key())))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._key() == other._key()

    def __ne__(self, other) -> bool:
        return not self == other

    def __str__(self) -> str:
        return to_string(self)

    def __repr__(self) -> str:
        args = ", ".join(repr(c) for c in self.children())
        return f"{type(self).__name__}({args})"

    def __call__(self, t):
        return evaluate(self, t)

    # builders
    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, k):
        return Pow(self, k)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Number):
        value = complex(value)
        if not cmath.isfinite(value):
            raise ValueError(f"constant must be finite, got {value!r}")
        object.__setattr__(self, "value", value + 0.0)  # drop negative zeros
        self._init_hash()

    def _key(self):
        return (self.value,)

    def __repr__(self):
        v = self.value
        return f"Const({_fmt_real(v.real)})" if v.imag == 0 else f"Const({v!r})"


class Var(Expr):
    """The free variable ``t``."""

    __slots__ = ()

    def __init__(self):
        self._init_hash()

    def __repr__(self):
        return "Var(t)"


class _Binary(Expr):
    __slots__ = ("left", "right")

    def __init__(self, left: Expr, right: Expr):
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        self._init_hash()

    def children(self):
        return (self.left, self.right)


class Add(_Binary):
    __slots__ = ()


class Sub(_Binary):
    __slots__ = ()


class Mul(_Binary):
    __slots__ = ()


class Div(_Binary):
    __slots__ = ()


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        object.__setattr__(self, "arg", arg)
        self._init_hash()

    def children(self):
        return (self.arg,)


class Pow(Expr):
    """``base ^ exponent`` with a constant real exponent."""

    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", _as_exponent(exponent))
        self._init_hash()

    def children(self):
        return (self.base,)

    def _key(self):
        return (self.base, self.exponent)

    def __repr__(self):
        return f"Pow({self.base!r}, {_fmt_exponent(self.exponent)})"


class Func(Expr):
    __slots__ = ("arg",)
    name = ""

    def __init__(self, arg: Expr):
        object.__setattr__(self, "arg", arg)
        self._init_hash()

    def children(self):
        return (self.arg,)


class Exp(Func):
    __slots__ = ()
    name = "exp"


class Ln(Func):
    __slots__ = ()
    name = "ln"


class Sin(Func):
    __slots__ = ()
    name = "sin"


class Cos(Func):
    __slots__ = ()
    name = "cos"


class Sqrt(Func):
    __slots__ = ()
    name = "sqrt"


FUNCTIONS: dict[str, type[Func]] = {f.name: f for f in (Exp, Ln, Sin, Cos, Sqrt)}

T = Var()
ZERO = Const(0)
ONE = Const(1)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return parse(x)
    return Const(x)


def _as_exponent(k) -> Exponent:
    if isinstance(k, Const):
        k = k.value
    if isinstance(k, complex):
        if k.imag != 0:
            raise ValueError("Pow exponent must be real")
        k = k.real
    if isinstance(k, (int, Fraction)):
        return Fraction(k)
    k = float(k)
    if not math.isfinite(k):
        raise ValueError("Pow exponent must be finite")
    frac = Fraction(k).limit_denominator(1000)
    return frac if float(frac) == k else k


def is_const(e: Expr) -> bool:
    return isinstance(e, Const)


def postorder(e: Expr) -> list[Expr]:
    """Distinct nodes of ``e`` (by identity), children before parents."""
    seen: set[int] = set()
    order: list[Expr] = []
    stack: list[tuple[Expr, bool]] = [(e, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded:
            seen.add(id(node))
            order.append(node)
            continue
        stack.append((node, True))
        for child in reversed(node.children()):
            if id(child) not in seen:
                stack.append((child, False))
    return order


def is_constant_expr(e: Expr) -> bool:
    """True when ``e`` does not depend on ``t``."""
    return not any(isinstance(n, Var) for n in postorder(e))


def size(e: Expr) -> int:
    return len(postorder(e))


# ---------------------------------------------------------------------------
# printing

_PREC_SUM, _PREC_PROD, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _fmt_real(x: float) -> str:
    x = x + 0.0
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _fmt_exponent(k: Exponent) -> str:
    if isinstance(k, Fraction):
        return str(k.numerator) if k.denominator == 1 else f"{k.numerator}/{k.denominator}"
    return _fmt_real(k)


def _const_text(v: complex) -> tuple[str, int]:
    re_, im = v.real, v.imag
    if im == 0:
        return _fmt_real(re_), (_PREC_ATOM if re_ >= 0 else _PREC_UNARY)
    if re_ == 0:
        if im == 1:
            return "i", _PREC_ATOM
        if im == -1:
            return "-i", _PREC_UNARY
        return f"{_fmt_real(im)}*i", _PREC_PROD
    sign = "+" if im > 0 else "-"
    mag = abs(im)
    imag_txt = "i" if mag == 1 else f"{_fmt_real(mag)}*i"
    return f"{_fmt_real(re_)} {sign} {imag_txt}", _PREC_SUM


def _leading_minus(text: str) -> bool:
    return text.startswith("-")


def _render(e: Expr, cache: dict[int, tuple[str, int]]) -> tuple[str, int]:
    hit = cache.get(id(e))
    if hit is not None:
        return hit

    def wrap(child: Expr, min_prec: int, no_minus: bool = False) -> str:
        text, prec = _render(child, cache)
        if prec < min_prec or (no_minus and _leading_minus(text)):
            return f"({text})"
        return text

    if isinstance(e, Const):
        out = _const_text(e.value)
    elif isinstance(e, Var):
        out = ("t", _PREC_ATOM)
    elif isinstance(e, (Add, Sub)):
        op = " + " if isinstance(e, Add) else " - "
        out = (wrap(e.left, _PREC_SUM) + op + wrap(e.right, _PREC_PROD, no_minus=True), _PREC_SUM)
    elif isinstance(e, (Mul, Div)):
        op = "*" if isinstance(e, Mul) else "/"
        out = (wrap(e.left, _PREC_PROD) + op + wrap(e.right, _PREC_POW, no_minus=True), _PREC_PROD)
    elif isinstance(e, Neg):
        out = ("-" + wrap(e.arg, _PREC_POW, no_minus=True), _PREC_UNARY)
    elif isinstance(e, Pow):
        k = e.exponent
        simple = isinstance(k, Fraction) and k.denominator == 1 and k >= 0
        exp_txt = _fmt_exponent(k) if simple else f"({_fmt_exponent(k)})"
        out = (wrap(e.base, _PREC_ATOM) + "^" + exp_txt, _PREC_POW)
    elif isinstance(e, Func):
        out = (f"{e.name}({_render(e.arg, cache)[0]})", _PREC_ATOM)
    else:  # pragma: no cover
        raise TypeError(type(e))
    cache[id(e)] = out
    return out


def to_string(e: Expr) -> str:
    cache: dict[int, tuple[str, int]] = {}
    for node in postorder(e):  # warm bottom-up so deep trees never recurse far
        _render(node, cache)
    return cache[id(e)][0]


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)
_BASE_START = frozenset({"number", "i", "pi", "t", "(", "-", *FUNCTIONS})


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        n = len(source)
        while pos < n:
            m = _TOKEN.match(source, pos)
            if m is None or m.end() == pos:
                rest = source[pos:]
                if rest.strip() == "":
                    break
                off = pos + (len(rest) - len(rest.lstrip()))
                raise ParseError(f"unexpected character {source[off]!r}", self._byte(off))
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.i = 0

    def _byte(self, char_offset: int) -> int:
        return len(self.source[:char_offset].encode("utf-8"))

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def offset(self) -> int:
        tok = self.peek()
        return self._byte(tok[2]) if tok else len(self.source.encode("utf-8"))

    def fail(self, expected: frozenset[str]):
        tok = self.peek()
        what = f"unexpected {tok[1]!r}" if tok else "unexpected end of input"
        raise ParseError(what, self.offset(), expected)

    def accept(self, op: str) -> bool:
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] == op:
            self.i += 1
            return True
        return False

    def expect(self, op: str) -> None:
        if not self.accept(op):
            self.fail(frozenset({op}))

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek() is not None:
            self.fail(frozenset({"+", "-", "*", "/", "^", "end of input"}))
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            if self.accept("+"):
                e = _fold(Add(e, self.term()))
            elif self.accept("-"):
                e = _fold(Sub(e, self.term()))
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            if self.accept("*"):
                e = _fold(Mul(e, self.unary()))
            elif self.accept("/"):
                e = _fold(Div(e, self.unary()))
            else:
                return e

    def unary(self) -> Expr:
        if self.accept("-"):
            return _fold(Neg(self.unary()))
        return self.power()

    def power(self) -> Expr:
        base = self.base()
        if not self.accept("^"):
            return base
        exponent = self.unary()
        if isinstance(exponent, Const) and exponent.value.imag == 0:
            return _fold(Pow(base, exponent.value.real))
        # general powers go through exp(g*ln(f))
        return _fold(Exp(Mul(exponent, Ln(base))))

    def base(self) -> Expr:
        tok = self.peek()
        if tok is None:
            self.fail(_BASE_START)
        kind, text, _ = tok
        if kind == "num":
            self.i += 1
            return Const(float(text))
        if kind == "name":
            if text == "t":
                self.i += 1
                return T
            if text == "i":
                self.i += 1
                return Const(1j)
            if text == "pi":
                self.i += 1
                return Const(math.pi)
            if text in FUNCTIONS:
                self.i += 1
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _fold(FUNCTIONS[text](arg))
            raise UnknownIdentifierError(f"unknown identifier {text!r}", self.offset(), _BASE_START)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        self.fail(_BASE_START)


def _fold(e: Expr) -> Expr:
    """Collapse an operator node whose operands are all constants."""
    if all(isinstance(c, Const) for c in e.children()):
        try:
            v = evaluate(e, 0.0)
        except EvaluationError:
            return e
        return Const(v)
    return e


def parse(source: str) -> Expr:
    """Parse ``source`` into an expression tree.

    Constant subexpressions are folded, so ``"2 + 3*i"`` becomes a single
    complex constant. Raises :class:`ParseError` (with a byte offset and the
    set of expected tokens) or :class:`UnknownIdentifierError`.
    """
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# evaluation


def _apply(node: Expr, vals: list, t_arr) -> complex | np.ndarray:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return t_arr
    if isinstance(node, Add):
        return vals[0] + vals[1]
    if isinstance(node, Sub):
        return vals[0] - vals[1]
    if isinstance(node, Mul):
        return vals[0] * vals[1]
    if isinstance(node, Div):
        return vals[0] / vals[1]
    if isinstance(node, Neg):
        return -vals[0]
    if isinstance(node, Pow):
        k = node.exponent
        if isinstance(k, Fraction) and k.denominator == 1:
            return np.power(vals[0], int(k))
        return np.power(vals[0], float(k))
    if isinstance(node, Exp):
        return np.exp(vals[0])
    if isinstance(node, Ln):
        return np.log(vals[0])
    if isinstance(node, Sin):
        return np.sin(vals[0])
    if isinstance(node, Cos):
        return np.cos(vals[0])
    if isinstance(node, Sqrt):
        return np.sqrt(vals[0])
    raise TypeError(type(node))  # pragma: no cover


def evaluate(e: Expr, t):
    """Evaluate ``e`` at ``t`` (float or array) in complex arithmetic.

    Returns a Python ``complex`` for scalar ``t`` and a complex array
    otherwise. Raises :class:`EvaluationError` naming the first subtree whose
    value is not finite.
    """
    t_in = np.asarray(t, dtype=float)
    t_arr = t_in.astype(complex)
    values: dict[int, object] = {}
    with np.errstate(all="ignore"):
        for node in postorder(e):
            v = _apply(node, [values[id(c)] for c in node.children()], t_arr)
            v = np.asarray(v, dtype=complex)
            finite = np.isfinite(v)
            if not np.all(finite):
                bad = np.broadcast_to(~finite, t_in.shape)
                where = float(t_in[bad].flat[0]) if t_in.ndim else float(t_in)
                raise EvaluationError(node, where)
            values[id(node)] = v
    out = np.broadcast_to(values[id(e)], t_in.shape)
    if t_in.ndim == 0:
        return complex(out)
    return np.array(out, dtype=complex)


_NP_FUNCS = {"exp": "np.exp", "ln": "np.log", "sin": "np.sin", "cos": "np.cos", "sqrt": "np.sqrt"}
_CM_FUNCS = {"exp": "cmath.exp", "ln": "cmath.log", "sin": "cmath.sin", "cos": "cmath.cos", "sqrt": "cmath.sqrt"}


def compile_expr(e: Expr, scalar: bool = False) -> Callable:
    """Translate ``e`` into a Python function of ``t``.

    With ``scalar=False`` the function takes an array of times and returns a
    complex array. With ``scalar=True`` it takes one float and uses ``cmath``,
    which is much faster inside step-by-step integrators. Non-finite results
    are re-evaluated through :func:`evaluate` to raise an
    :class:`EvaluationError` that names the offending subtree.
    """
    funcs = _CM_FUNCS if scalar else _NP_FUNCS
    names: dict[int, str] = {}
    lines: list[str] = []
    for k, node in enumerate(postorder(e)):
        name = f"v{k}"
        ch = [names[id(c)] for c in node.children()]
        if isinstance(node, Const):
            rhs = repr(node.value)
        elif isinstance(node, Var):
            rhs = "t" if scalar else "tc"
        elif isinstance(node, Add):
            rhs = f"{ch[0]} + {ch[1]}"
        elif isinstance(node, Sub):
            rhs = f"{ch[0]} - {ch[1]}"
        elif isinstance(node, Mul):
            rhs = f"{ch[0]} * {ch[1]}"
        elif isinstance(node, Div):
            rhs = f"{ch[0]} / {ch[1]}"
        elif isinstance(node, Neg):
            rhs = f"-{ch[0]}"
        elif isinstance(node, Pow):
            k_ = node.exponent
            kk = int(k_) if isinstance(k_, Fraction) and k_.denominator == 1 else float(k_)
            rhs = f"{ch[0]} ** {kk!r}"
        elif isinstance(node, Func):
            rhs = f"{funcs[node.name]}({ch[0]})"
        else:  # pragma: no cover
            raise TypeError(type(node))
        lines.append(f"    {name} = {rhs}")
        names[id(node)] = name
    result = names[id(e)]
    if scalar:
        src = "def _f(t):\n    t = complex(t)\n" + "\n".join(lines) + f"\n    return complex({result})\n"
    else:
        src = (
            "def _f(t):\n    tc = np.asarray(t, dtype=float).astype(complex)\n"
            + "\n".join(lines)
            + f"\n    return np.broadcast_to(np.asarray({result}, dtype=complex), tc.shape).copy()\n"
        )
    namespace = {"np": np, "cmath": cmath}
    exec(compile(src, "<expr>", "exec"), namespace)
    raw = namespace["_f"]

    if scalar:

        def f(t):
            try:
                v = raw(t)
            except (ZeroDivisionError, ValueError, OverflowError):
                evaluate(e, t)
                raise
            if not cmath.isfinite(v):
                evaluate(e, t)
            return v

    else:

        def f(t):
            with np.errstate(all="ignore"):
                v = raw(t)
            if not np.all(np.isfinite(v)):
                evaluate(e, t)
            return v

    f.expr = e
    return f


# ---------------------------------------------------------------------------
# differentiation


def _d_node(node: Expr, d: dict[int, Expr]) -> Expr:
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE
    if isinstance(node, (Add, Sub)):
        return type(node)(d[id(node.left)], d[id(node.right)])
    if isinstance(node, Mul):
        l, r = node.left, node.right
        return Add(Mul(d[id(l)], r), Mul(l, d[id(r)]))
    if isinstance(node, Div):
        l, r = node.left, node.right
        return Sub(Div(d[id(l)], r), Div(Mul(l, d[id(r)]), Pow(r, 2)))
    if isinstance(node, Neg):
        return Neg(d[id(node.arg)])
    if isinstance(node, Pow):
        k = node.exponent
        return Mul(Mul(Const(float(k)), Pow(node.base, k - 1)), d[id(node.base)])
    du = d[id(node.arg)]
    if isinstance(node, Exp):
        return Mul(node, du)
    if isinstance(node, Ln):
        return Div(du, node.arg)
    if isinstance(node, Sin):
        return Mul(Cos(node.arg), du)
    if isinstance(node, Cos):
        return Neg(Mul(Sin(node.arg), du))
    if isinstance(node, Sqrt):
        return Div(du, Mul(Const(2), node))
    raise TypeError(type(node))  # pragma: no cover


def differentiate(e: Expr, simplified: bool = True) -> Expr:
    """Symbolic d/dt of ``e``; the result is simplified unless asked not to."""
    d: dict[int, Expr] = {}
    for node in postorder(e):
        d[id(node)] = _d_node(node, d)
    out = d[id(e)]
    return simplify(out) if simplified else out


def nth_derivative(e: Expr, n: int) -> Expr:
    for _ in range(n):
        e = differentiate(e)
    return e


# ---------------------------------------------------------------------------
# simplification


def _is_int(k: Exponent) -> bool:
    return isinstance(k, Fraction) and k.denominator == 1


def _mul_exp(a: Exponent, b: Exponent) -> Exponent:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a * b
    return _as_exponent(float(a) * float(b))


def _add_exp(a: Exponent, b: Exponent) -> Exponent:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a + b
    return _as_exponent(float(a) + float(b))


class _Product:
    """coefficient * prod(base ** exponent), insertion-ordered."""

    __slots__ = ("coef", "factors")

    def __init__(self):
        self.coef: complex = 1
        self.factors: dict[Expr, Exponent] = {}

    def add(self, e: Expr, k: Exponent = Fraction(1)) -> None:
        if isinstance(e, Const):
            with np.errstate(all="ignore"):
                kk = int(k) if _is_int(k) else float(k)
                self.coef *= complex(np.power(np.complex128(e.value), kk))
        elif isinstance(e, Neg) and _is_int(k):
            self.coef *= (-1) ** int(k)
            self.add(e.arg, k)
        elif isinstance(e, Mul) and _is_int(k):
            self.add(e.left, k)
            self.add(e.right, k)
        elif isinstance(e, Div) and _is_int(k):
            self.add(e.left, k)
            self.add(e.right, -k)
        elif isinstance(e, Pow) and _is_int(k):
            self.add(e.base, _mul_exp(e.exponent, k))
        elif isinstance(e, Sqrt) and _is_int(k):
            self.add(e.arg, Fraction(k, 2))
        else:
            prev = self.factors.get(e)
            self.factors[e] = k if prev is None else _add_exp(prev, k)

    def rest(self) -> Expr | None:
        num: list[Expr] = []
        den: list[Expr] = []
        for base, k in self.factors.items():
            if k == 0:
                continue
            target = num if k > 0 else den
            target.append(_power(base, abs(k)))
        if not num and not den:
            return None
        top = _chain(num) if num else ONE
        return Div(top, _chain(den)) if den else top


def _power(base: Expr, k: Exponent) -> Expr:
    if k == 1:
        return base
    if k == Fraction(1, 2):
        return Sqrt(base)
    return Pow(base, k)


def _chain(items: list[Expr]) -> Expr:
    out = items[0]
    for it in items[1:]:
        out = Mul(out, it)
    return out


def _scaled(coef: complex, rest: Expr | None) -> Expr:
    if rest is None:
        return Const(coef)
    if coef == 1:
        return rest
    if coef == -1:
        return Neg(rest)
    if isinstance(rest, Div):
        num = rest.left
        top = Const(coef) if num == ONE else Mul(Const(coef), num)
        return Div(top, rest.right)
    return Mul(Const(coef), rest)


def _product_form(e: Expr) -> _Product:
    p = _Product()
    p.add(e)
    return p


def _simplify_product(e: Expr) -> Expr:
    p = _product_form(e)
    if not cmath.isfinite(p.coef):
        return e
    if p.coef == 0:
        return ZERO
    return _scaled(p.coef, p.rest())


def _collect_terms(e: Expr, sign: int, out: list[tuple[int, Expr]]) -> None:
    if isinstance(e, Add):
        _collect_terms(e.left, sign, out)
        _collect_terms(e.right, sign, out)
    elif isinstance(e, Sub):
        _collect_terms(e.left, sign, out)
        _collect_terms(e.right, -sign, out)
    elif isinstance(e, Neg):
        _collect_terms(e.arg, -sign, out)
    else:
        out.append((sign, e))


def _is_negative_real(c: complex) -> bool:
    return c.imag == 0 and c.real < 0


def _simplify_sum(e: Expr) -> Expr:
    raw: list[tuple[int, Expr]] = []
    _collect_terms(e, 1, raw)
    const = 0j
    terms: dict[Expr, complex] = {}
    for sign, term in raw:
        if isinstance(term, Const):
            const += sign * term.value
            continue
        p = _product_form(term)
        rest = p.rest()
        if rest is None:
            const += sign * p.coef
            continue
        terms[rest] = terms.get(rest, 0j) + sign * p.coef
    if not (cmath.isfinite(const) and all(cmath.isfinite(c) for c in terms.values())):
        return e
    pieces = [(c, r) for r, c in terms.items() if c != 0]
    if const != 0:
        pieces.append((const, None))
    if not pieces:
        return ZERO
    c0, r0 = pieces[0]
    out = _scaled(c0, r0)
    for c, r in pieces[1:]:
        if _is_negative_real(c):
            out = Sub(out, _scaled(-c, r))
        else:
            out = Add(out, _scaled(c, r))
    return out


def _simplify_node(node: Expr, s: dict[int, Expr]) -> Expr:
    if isinstance(node, (Const, Var)):
        return node
    kids = [s[id(c)] for c in node.children()]
    if isinstance(node, Pow):
        new = Pow(kids[0], node.exponent)
    else:
        new = type(node)(*kids)
    if all(isinstance(k, Const) for k in kids):
        folded = _fold(new)
        if isinstance(folded, Const):
            return folded
    if isinstance(new, (Add, Sub, Neg)):
        return _simplify_sum(new)
    if isinstance(new, (Mul, Div, Pow)):
        if isinstance(new, Pow) and new.exponent == 0:
            return ONE
        return _simplify_product(new)
    if isinstance(new, Exp) and isinstance(kids[0], Ln):
        return kids[0].arg
    return new


def simplify(e: Expr) -> Expr:
    """Best-effort algebraic cleanup: constant folding, 0/1 identities,
    like-term and like-factor collection. Never rewrites across branch cuts."""
    s: dict[int, Expr] = {}
    for node in postorder(e):
        s[id(node)] = _simplify_node(node, s)
    return s[id(e)]


def walk(e: Expr) -> Iterator[Expr]:
    yield from postorder(e)
