"""Small expression language for the user-supplied arbitrary functions.

Expressions are immutable trees over real literals, named variables, the
arithmetic operators, powers with constant rational exponents and the
elementary functions ``sin cos tan exp ln sqrt atan``.  They can be parsed
from text, printed back, differentiated exactly, lightly simplified,
evaluated pointwise and compiled to fast numpy/math callables.

Grammar (``^`` and ``**`` are synonyms, right associative)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom (('^' | '**') unary)?
    atom    := NUMBER | 'pi' | NAME | FUNC '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt", "atan")


class ExprError(ValueError):
    """Base class for expression-language errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int, source: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.source = source


class UnknownFunctionError(ExprSyntaxError):
    pass


class UnboundVariableError(ExprError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


class ExprDomainError(ExprError):
    def __init__(self, message: str, bindings: Mapping[str, float] | None = None):
        detail = ""
        if bindings:
            detail = " (" + ", ".join(f"{k}={v!r}" for k, v in sorted(bindings.items())) + ")"
        super().__init__(message + detail)
        self.bindings = dict(bindings or {})


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


class Expr:
    """Base node.  Nodes are immutable, hashable and compare structurally."""

    __slots__ = ("_key", "_hash")
    precedence = 100

    def _init_key(self, key: tuple) -> None:
        object.__setattr__(self, "_key", key)
        object.__setattr__(self, "_hash", hash(key))

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Expr) or self._hash != other._hash:
            return False
        return self._key == other._key

    def __repr__(self) -> str:
        return f"{type(self).__name__}({', '.join(map(repr, self._key[1:]))})"

    def __str__(self) -> str:
        return to_text(self)

    # Operator sugar, used heavily when assembling field formulas.
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

    def __pow__(self, exponent):
        return Pow(self, exponent)


class Num(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        value = float(value)
        object.__setattr__(self, "value", value)
        # -0.0 and 0.0 are the same literal
        self._init_key(("num", value + 0.0))


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)
        self._init_key(("var", name))


class Neg(Expr):
    __slots__ = ("arg",)
    precedence = 3

    def __init__(self, arg: Expr):
        object.__setattr__(self, "arg", arg)
        self._init_key(("neg", arg))


class _Binary(Expr):
    __slots__ = ("left", "right")
    symbol = "?"

    def __init__(self, left: Expr, right: Expr):
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        self._init_key((self.symbol, left, right))


class Add(_Binary):
    __slots__ = ()
    symbol = "+"
    precedence = 1


class Sub(_Binary):
    __slots__ = ()
    symbol = "-"
    precedence = 1


class Mul(_Binary):
    __slots__ = ()
    symbol = "*"
    precedence = 2


class Div(_Binary):
    __slots__ = ()
    symbol = "/"
    precedence = 2


class Pow(Expr):
    """``base ^ exponent`` with a constant rational exponent."""

    __slots__ = ("base", "exponent")
    precedence = 4

    def __init__(self, base: Expr, exponent):
        exponent = _to_fraction(exponent)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", exponent)
        self._init_key(("^", base, exponent))


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        if name not in FUNCTIONS:
            raise UnknownFunctionError(f"unknown function {name!r}", 0)
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "arg", arg)
        self._init_key(("fn", name, arg))


ZERO = Num(0.0)
ONE = Num(1.0)


def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Num):
        value = value.value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ExprError(f"exponent must be finite, got {value!r}")
        frac = Fraction(value).limit_denominator(1_000_000)
        if float(frac) != value:
            frac = Fraction(value)
        return frac
    raise ExprError(f"exponent must be a constant rational number, got {value!r}")


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, Fraction, np.floating, np.integer)):
        return Num(float(value))
    raise TypeError(f"cannot convert {type(value).__name__} to Expr")


def sin(e) -> Expr:
    return Func("sin", as_expr(e))


def cos(e) -> Expr:
    return Func("cos", as_expr(e))


def tan(e) -> Expr:
    return Func("tan", as_expr(e))


def exp(e) -> Expr:
    return Func("exp", as_expr(e))


def ln(e) -> Expr:
    return Func("ln", as_expr(e))


def sqrt(e) -> Expr:
    return Func("sqrt", as_expr(e))


def atan(e) -> Expr:
    return Func("atan", as_expr(e))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^()])
    """,
    re.VERBOSE,
)


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(source):
            m = _TOKEN_RE.match(source, pos)
            if m is None:
                raise ExprSyntaxError(
                    f"unexpected character {source[pos]!r}", self._byte(pos), source
                )
            kind = m.lastgroup
            if kind != "ws":
                text = m.group()
                if kind == "op" and text == "**":
                    text = "^"
                self.tokens.append((kind, text, pos))
            pos = m.end()
        self.tokens.append(("end", "", len(source)))
        self.i = 0

    def _byte(self, char_pos: int) -> int:
        return len(self.source[:char_pos].encode("utf-8"))

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok=None, cls=ExprSyntaxError):
        tok = tok or self.peek()
        where = "end of input" if tok[0] == "end" else repr(tok[1])
        return cls(f"{message} (found {where})", self._byte(tok[2]), self.source)

    def expect(self, text: str) -> None:
        tok = self.peek()
        if tok[1] != text or tok[0] != "op":
            raise self.error(f"expected {text!r}")
        self.take()

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            raise self.error("unexpected token")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self) -> Expr:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.take()
            exp_tok = self.peek()
            exponent = self.unary()
            value = _constant_rational(exponent)
            if value is None:
                raise self.error(
                    "exponent must be a constant rational number", exp_tok
                )
            return Pow(base, value)
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        kind, text, _ = tok
        if kind == "num":
            self.take()
            return Num(float(text))
        if kind == "name":
            self.take()
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if text not in FUNCTIONS:
                    raise self.error(f"unknown function {text!r}", tok, UnknownFunctionError)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            if text in FUNCTIONS:
                raise self.error(f"function {text!r} needs an argument", self.peek())
            if text == "pi":
                return Num(math.pi)
            return Var(text)
        if kind == "op" and text == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        raise self.error("expected a number, name or '('")


def _constant_rational(e: Expr) -> Fraction | None:
    """Exact rational value of a constant exponent expression, else None."""
    if isinstance(e, Num):
        try:
            return _to_fraction(e.value)
        except ExprError:
            return None
    if isinstance(e, Neg):
        v = _constant_rational(e.arg)
        return None if v is None else -v
    if isinstance(e, (Add, Sub, Mul, Div)):
        a, b = _constant_rational(e.left), _constant_rational(e.right)
        if a is None or b is None:
            return None
        if isinstance(e, Add):
            return a + b
        if isinstance(e, Sub):
            return a - b
        if isinstance(e, Mul):
            return a * b
        return None if b == 0 else a / b
    if isinstance(e, Pow):
        a = _constant_rational(e.base)
        if a is None or e.exponent.denominator != 1 or (a == 0 and e.exponent < 0):
            return None
        return a ** int(e.exponent)
    return None


def parse(source: str) -> Expr:
    """Parse expression text into an :class:`Expr`.

    Raises :class:`ExprSyntaxError` (with ``offset`` in bytes) for malformed
    input and :class:`UnknownFunctionError` for calls to unknown functions.
    Unknown variables are accepted; they fail at evaluation time.
    """
    if not isinstance(source, str):
        raise ExprError(f"expression must be text, got {type(source).__name__}")
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _num_text(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(v)
    return f"({s})" if v < 0 or s.startswith("-") else s


def _frac_text(f: Fraction) -> str:
    if f.denominator == 1:
        return str(f.numerator) if f >= 0 else f"({f.numerator})"
    return f"({f.numerator}/{f.denominator})"


def to_text(e: Expr) -> str:
    """Render ``e`` in the grammar accepted by :func:`parse`."""
    if isinstance(e, Num):
        return _num_text(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_text(e.arg)})"
    if isinstance(e, Neg):
        inner = to_text(e.arg)
        if e.arg.precedence <= Neg.precedence:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Pow):
        base = to_text(e.base)
        if e.base.precedence <= Pow.precedence or isinstance(e.base, Num):
            base = f"({base})"
        return f"{base}^{_frac_text(e.exponent)}"
    if isinstance(e, _Binary):
        left = to_text(e.left)
        right = to_text(e.right)
        if e.left.precedence < e.precedence:
            left = f"({left})"
        # left-associative: equal precedence on the right needs parens for - and /
        if e.right.precedence < e.precedence or (
            e.right.precedence == e.precedence and not isinstance(e, (Add, Mul))
        ) or (e.right.precedence == e.precedence and isinstance(e, Mul) and isinstance(e.right, Div)):
            right = f"({right})"
        return f"{left} {e.symbol} {right}"
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Structural helpers
# ---------------------------------------------------------------------------


def free_variables(e: Expr) -> frozenset[str]:
    out: set[str] = set()
    stack = [e]
    seen: set[int] = set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, Var):
            out.add(node.name)
        else:
            stack.extend(_children(node))
    return frozenset(out)


def _children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, _Binary):
        return (e.left, e.right)
    if isinstance(e, (Neg, Func)):
        return (e.arg,)
    if isinstance(e, Pow):
        return (e.base,)
    return ()


def _rebuild(e: Expr, children: Sequence[Expr]) -> Expr:
    if isinstance(e, _Binary):
        return type(e)(children[0], children[1])
    if isinstance(e, Neg):
        return Neg(children[0])
    if isinstance(e, Func):
        return Func(e.name, children[0])
    if isinstance(e, Pow):
        return Pow(children[0], e.exponent)
    return e


def substitute(e: Expr, mapping: Mapping[str, Expr | float]) -> Expr:
    """Replace variables by expressions (simultaneously)."""
    repl = {k: as_expr(v) for k, v in mapping.items()}
    memo: dict[Expr, Expr] = {}

    def go(node: Expr) -> Expr:
        if node in memo:
            return memo[node]
        if isinstance(node, Var):
            out = repl.get(node.name, node)
        else:
            kids = _children(node)
            out = _rebuild(node, [go(k) for k in kids]) if kids else node
        memo[node] = out
        return out

    return go(e)


def node_count(e: Expr) -> int:
    return 1 + sum(node_count(c) for c in _children(e))


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------


def differentiate(e: Expr, var: str) -> Expr:
    """Exact derivative of ``e`` with respect to ``var`` (unsimplified)."""
    memo: dict[Expr, Expr] = {}

    def d(node: Expr) -> Expr:
        if node in memo:
            return memo[node]
        out = _d(node)
        memo[node] = out
        return out

    def _d(node: Expr) -> Expr:
        if isinstance(node, Num):
            return ZERO
        if isinstance(node, Var):
            return ONE if node.name == var else ZERO
        if isinstance(node, Neg):
            return Neg(d(node.arg))
        if isinstance(node, Add):
            return Add(d(node.left), d(node.right))
        if isinstance(node, Sub):
            return Sub(d(node.left), d(node.right))
        if isinstance(node, Mul):
            u, v = node.left, node.right
            return Add(Mul(d(u), v), Mul(u, d(v)))
        if isinstance(node, Div):
            u, v = node.left, node.right
            return Div(Sub(Mul(d(u), v), Mul(u, d(v))), Pow(v, 2))
        if isinstance(node, Pow):
            n = node.exponent
            if n == 0:
                return ZERO
            inner = ONE if n == 1 else Pow(node.base, n - 1)
            return Mul(Mul(Num(float(n)), inner), d(node.base))
        if isinstance(node, Func):
            u = node.arg
            du = d(u)
            name = node.name
            if name == "sin":
                outer = Func("cos", u)
            elif name == "cos":
                outer = Neg(Func("sin", u))
            elif name == "tan":
                outer = Add(ONE, Pow(Func("tan", u), 2))
            elif name == "exp":
                outer = node
            elif name == "ln":
                return Div(du, u)
            elif name == "sqrt":
                return Div(du, Mul(Num(2.0), node))
            elif name == "atan":
                return Div(du, Add(ONE, Pow(u, 2)))
            else:  # pragma: no cover - guarded by Func constructor
                raise UnknownFunctionError(f"unknown function {name!r}", 0)
            return Mul(outer, du)
        raise TypeError(f"not an Expr: {node!r}")

    return d(e)


def derivative(e: Expr, var: str, order: int = 1) -> Expr:
    """Repeated differentiation with simplification between passes."""
    for _ in range(order):
        e = simplify(differentiate(e, var))
    return e


# ---------------------------------------------------------------------------
# Simplification: constant folding, 0/1 identities, like-term collection
# ---------------------------------------------------------------------------


def _is_num(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Num) and (value is None or e.value == value)


def _fold(node: Expr) -> Expr:
    try:
        value = _eval_node(node, {})
    except (ExprError, OverflowError, ValueError, ZeroDivisionError):
        return node
    if not math.isfinite(value):
        return node
    return Num(value)


def _split_coef(e: Expr) -> tuple[float, Expr | None]:
    """Split a product into (numeric coefficient, remaining factor)."""
    if isinstance(e, Num):
        return e.value, None
    if isinstance(e, Neg):
        c, rest = _split_coef(e.arg)
        return -c, rest
    if isinstance(e, Mul):
        cl, rl = _split_coef(e.left)
        cr, rr = _split_coef(e.right)
        if rl is None:
            return cl * cr, rr
        if rr is None:
            return cl * cr, rl
        return cl * cr, Mul(rl, rr)
    return 1.0, e


def _collect_terms(e: Expr, sign: float, out: list[tuple[float, Expr | None]]) -> None:
    if isinstance(e, Add):
        _collect_terms(e.left, sign, out)
        _collect_terms(e.right, sign, out)
    elif isinstance(e, Sub):
        _collect_terms(e.left, sign, out)
        _collect_terms(e.right, -sign, out)
    elif isinstance(e, Neg):
        _collect_terms(e.arg, -sign, out)
    else:
        c, rest = _split_coef(e)
        out.append((sign * c, rest))


def _scaled(coef: float, term: Expr | None) -> Expr:
    if term is None:
        return Num(coef)
    if coef == 1.0:
        return term
    if coef == -1.0:
        return Neg(term)
    return Mul(Num(coef), term)


def _simplify_sum(node: Expr) -> Expr:
    terms: list[tuple[float, Expr | None]] = []
    _collect_terms(node, 1.0, terms)
    order: list[Expr | None] = []
    coefs: dict[Expr | None, float] = {}
    for c, t in terms:
        if t not in coefs:
            order.append(t)
            coefs[t] = 0.0
        coefs[t] += c
    kept = [(coefs[t], t) for t in order if coefs[t] != 0.0]
    if not kept:
        return ZERO
    # constant last, for readability
    kept.sort(key=lambda ct: ct[1] is None)
    out: Expr | None = None
    for c, t in kept:
        if out is None:
            out = _scaled(c, t)
        elif c < 0:
            out = Sub(out, _scaled(-c, t))
        else:
            out = Add(out, _scaled(c, t))
    assert out is not None
    return out


def simplify(e: Expr) -> Expr:
    """Value-preserving cleanup of ``e``.

    Folds constant subtrees, applies 0/1 identities, merges numeric factors
    of products and collects like terms of sums.  No expansion or
    canonicalisation beyond that.
    """
    memo: dict[Expr, Expr] = {}

    def go(node: Expr) -> Expr:
        if node in memo:
            return memo[node]
        kids = _children(node)
        new = _rebuild(node, [go(k) for k in kids]) if kids else node
        out = _local(new)
        memo[node] = out
        return out

    return go(e)


def _local(node: Expr) -> Expr:
    kids = _children(node)
    if kids and all(isinstance(k, Num) for k in kids):
        return _fold(node)
    if isinstance(node, Neg):
        if isinstance(node.arg, Neg):
            return node.arg.arg
        return node
    if isinstance(node, (Add, Sub)):
        return _simplify_sum(node)
    if isinstance(node, Mul):
        if _is_num(node.left, 0.0) or _is_num(node.right, 0.0):
            return ZERO
        c, rest = _split_coef(node)
        if rest is None:
            return Num(c)
        if c == 0.0:
            return ZERO
        return _scaled(c, rest)
    if isinstance(node, Div):
        if _is_num(node.left, 0.0):
            return ZERO
        if _is_num(node.right, 1.0):
            return node.left
        if _is_num(node.right, -1.0):
            return Neg(node.left)
        if node.left == node.right:
            return node  # x/x is undefined at x=0; leave it
        return node
    if isinstance(node, Pow):
        if node.exponent == 1:
            return node.base
        if node.exponent == 0:
            return node  # 0^0 left alone
        if isinstance(node.base, Pow):
            inner = node.base
            # (b^p)^q = b^(pq) is safe when p is an odd-denominator... keep to integers
            if inner.exponent.denominator == 1 and node.exponent.denominator == 1:
                return Pow(inner.base, inner.exponent * node.exponent)
        return node
    return node


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _rational_pow(base: float, exponent: Fraction) -> float:
    if exponent.denominator == 1:
        n = exponent.numerator
        if base == 0.0 and n < 0:
            raise ZeroDivisionError("zero to a negative power")
        return float(base) ** n
    if base < 0.0:
        if exponent.denominator % 2 == 0:
            raise ValueError("even root of a negative number")
        mag = (-base) ** float(exponent)
        return -mag if exponent.numerator % 2 else mag
    if base == 0.0 and exponent < 0:
        raise ZeroDivisionError("zero to a negative power")
    return float(base) ** float(exponent)


def _apply(name: str, v: float) -> float:
    if name == "sin":
        return math.sin(v)
    if name == "cos":
        return math.cos(v)
    if name == "tan":
        return math.tan(v)
    if name == "exp":
        return math.exp(v)
    if name == "ln":
        if v <= 0.0:
            raise ValueError("ln of a non-positive number")
        return math.log(v)
    if name == "sqrt":
        if v < 0.0:
            raise ValueError("sqrt of a negative number")
        return math.sqrt(v)
    if name == "atan":
        return math.atan(v)
    raise UnknownFunctionError(f"unknown function {name!r}", 0)


def _eval_node(e: Expr, env: Mapping[str, float]) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return float(env[e.name])
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Neg):
        return -_eval_node(e.arg, env)
    if isinstance(e, Add):
        return _eval_node(e.left, env) + _eval_node(e.right, env)
    if isinstance(e, Sub):
        return _eval_node(e.left, env) - _eval_node(e.right, env)
    if isinstance(e, Mul):
        return _eval_node(e.left, env) * _eval_node(e.right, env)
    if isinstance(e, Div):
        den = _eval_node(e.right, env)
        if den == 0.0:
            raise ZeroDivisionError("division by zero")
        return _eval_node(e.left, env) / den
    if isinstance(e, Pow):
        return _rational_pow(_eval_node(e.base, env), e.exponent)
    if isinstance(e, Func):
        return _apply(e.name, _eval_node(e.arg, env))
    raise TypeError(f"not an Expr: {e!r}")


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate ``e`` at a point.

    Raises :class:`UnboundVariableError` for missing variables and
    :class:`ExprDomainError` (carrying the bindings) for domain violations
    such as ``ln(-1)`` or division by zero.
    """
    try:
        value = _eval_node(e, bindings)
    except ZeroDivisionError as exc:
        raise ExprDomainError(f"domain error: {exc}", bindings) from None
    except (ValueError, OverflowError) as exc:
        if isinstance(exc, ExprError):
            raise
        raise ExprDomainError(f"domain error: {exc}", bindings) from None
    if not math.isfinite(value):
        raise ExprDomainError("non-finite result", bindings)
    return value


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------


def _np_rational_pow(base, p: int, q: int):
    base = np.asarray(base, dtype=float)
    if q == 1:
        return base ** p if p >= 0 else 1.0 / base ** (-p)
    if q % 2 == 1:
        mag = np.abs(base) ** (p / q)
        return np.where(base < 0, -mag, mag) if p % 2 else mag
    return np.power(base, p / q)


_NP_FUNCS = {
    "sin": "np.sin",
    "cos": "np.cos",
    "tan": "np.tan",
    "exp": "np.exp",
    "ln": "np.log",
    "sqrt": "np.sqrt",
    "atan": "np.arctan",
}


def _math_ln(v):
    if v <= 0.0:
        raise ValueError("ln of a non-positive number")
    return math.log(v)


_MATH_FUNCS = {
    "sin": "math.sin",
    "cos": "math.cos",
    "tan": "math.tan",
    "exp": "math.exp",
    "ln": "_ln",
    "sqrt": "math.sqrt",
    "atan": "math.atan",
}


def _codegen(exprs: Sequence[Expr], args: Sequence[str], backend: str) -> str:
    argmap = {name: f"a{i}" for i, name in enumerate(args)}
    lines: list[str] = []
    names: dict[Expr, str] = {}
    funcs = _NP_FUNCS if backend == "numpy" else _MATH_FUNCS

    def emit(node: Expr) -> str:
        if node in names:
            return names[node]
        if isinstance(node, Num):
            return repr(node.value)
        if isinstance(node, Var):
            if node.name not in argmap:
                raise UnboundVariableError(node.name)
            return argmap[node.name]
        if isinstance(node, Neg):
            code = f"-({emit(node.arg)})"
        elif isinstance(node, _Binary):
            code = f"({emit(node.left)}) {node.symbol} ({emit(node.right)})"
        elif isinstance(node, Pow):
            p, q = node.exponent.numerator, node.exponent.denominator
            b = emit(node.base)
            if backend == "numpy":
                code = f"_rpow({b}, {p}, {q})"
            elif q == 1:
                code = f"({b}) ** {p}"
            else:
                code = f"_spow({b}, _F({p}, {q}))"
        elif isinstance(node, Func):
            code = f"{funcs[node.name]}({emit(node.arg)})"
        else:
            raise TypeError(f"not an Expr: {node!r}")
        name = f"_{len(names)}"
        names[node] = name
        lines.append(f"    {name} = {code}")
        return name

    results = [emit(e) for e in exprs]
    header = f"def _f({', '.join(argmap[a] for a in args)}):"
    body = "\n".join(lines)
    ret = f"    return ({', '.join(results)},)"
    return "\n".join(part for part in (header, body, ret) if part)


class CompiledExpr:
    """Callable produced by :func:`compile_exprs`.

    Calling with positional arguments (in ``args`` order) returns a tuple with
    one value per compiled expression.  The numpy backend broadcasts over
    arrays; the math backend is faster for scalars.  Both raise
    :class:`ExprDomainError` on non-finite or undefined results.
    """

    def __init__(self, exprs: Sequence[Expr], args: Sequence[str], backend: str = "numpy"):
        if backend not in ("numpy", "math"):
            raise ValueError(f"unknown backend {backend!r}")
        self.exprs = tuple(exprs)
        self.args = tuple(args)
        self.backend = backend
        self.source = _codegen(self.exprs, self.args, backend)
        namespace = {
            "np": np,
            "math": math,
            "_rpow": _np_rational_pow,
            "_spow": _rational_pow,
            "_F": Fraction,
            "_ln": _math_ln,
        }
        exec(compile(self.source, "<exprlang>", "exec"), namespace)
        self._fn = namespace["_f"]

    def __call__(self, *values):
        if self.backend == "math":
            try:
                out = self._fn(*values)
            except ZeroDivisionError as exc:
                raise ExprDomainError(f"domain error: {exc}", dict(zip(self.args, values))) from None
            except (ValueError, OverflowError) as exc:
                raise ExprDomainError(f"domain error: {exc}", dict(zip(self.args, values))) from None
            for v in out:
                if not math.isfinite(v):
                    raise ExprDomainError("non-finite result", dict(zip(self.args, values)))
            return out
        with np.errstate(all="ignore"):
            out = self._fn(*values)
        for v in out:
            if not np.all(np.isfinite(v)):
                raise ExprDomainError(
                    "non-finite result", _first_bad(self.args, values, v)
                )
        return out


def _first_bad(args, values, result) -> dict[str, float]:
    arr = np.asarray(result)
    if arr.ndim == 0:
        return {a: float(np.asarray(v).ravel()[0]) for a, v in zip(args, values)}
    bad = np.argwhere(~np.isfinite(np.broadcast_to(arr, np.broadcast(*values, arr).shape)))
    idx = tuple(bad[0])
    point = {}
    for a, v in zip(args, values):
        v = np.asarray(v, dtype=float)
        point[a] = float(np.broadcast_to(v, np.broadcast(*values, arr).shape)[idx])
    return point


def compile_exprs(
    exprs: Expr | Iterable[Expr], args: Sequence[str], backend: str = "numpy"
) -> CompiledExpr:
    """Compile one or several expressions sharing common subexpressions."""
    if isinstance(exprs, Expr):
        exprs = [exprs]
    return CompiledExpr(list(exprs), args, backend)


def lambdify(e: Expr, args: Sequence[str], backend: str = "numpy") -> Callable:
    """Single-expression convenience wrapper returning a plain callable."""
    compiled = compile_exprs([e], args, backend)

    def f(*values):
        return compiled(*values)[0]

    f.source = compiled.source  # type: ignore[attr-defined]
    return f
