"""Symbolic scalar expressions: parsing, evaluation, differentiation.

Coefficient functions (equation coefficients, delays, the auxiliary pair,
histories) are kept as small expression trees rather than opaque callables so
that the derivatives the stability criteria need (delay slopes, p', the
neutral-combination derivative) are exact.

Grammar (EBNF in docs/grammar.ebnf):

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" factor)?
    atom   := NUMBER | VARIABLE | FUNC "(" expr ")"
            | "sgnpow" "(" expr "," RATIONAL ")" | "(" expr ")"

Functions: sin, cos, exp, ln, abs, sgnpow.  ``sgnpow(x, p/q)`` is the signed
power sign(x) * |x|^(p/q); its exponent is stored as an exact Fraction so odd
denominators survive round-trips.  ``^`` with an integer literal exponent
accepts negative bases; any other exponent requires a positive base.

Evaluation is total on the declared domain: division by zero, ln of a
non-positive argument, an illegal power, or a non-finite result raise
DomainError instead of silently producing inf/nan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from .errors import DomainError, NonDifferentiableError, ParseError

__all__ = [
    "Expression",
    "parse_expression",
    "differentiate",
    "signed_power",
]

_UNARY_FUNCS = ("sin", "cos", "exp", "ln", "abs")


# ---------------------------------------------------------------------------
# AST nodes

class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class BinOp(Node):
    op: str  # one of + - * / ^
    left: Node
    right: Node


@dataclass(frozen=True)
class Call(Node):
    func: str  # sin | cos | exp | ln | abs
    arg: Node


@dataclass(frozen=True)
class SgnPow(Node):
    arg: Node
    exponent: Fraction


def _neg(node: Node) -> Node:
    # fold so printed negative literals reparse to the same tree
    if isinstance(node, Const):
        return Const(-node.value)
    return Neg(node)


# ---------------------------------------------------------------------------
# Tokenizer

_OPS = set("+-*/^(),")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens: list[tuple[str, str, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _OPS:
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            tokens.append(("num", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Parser (recursive descent, see module grammar)

class _Parser:
    def __init__(self, text: str, variables: tuple[str, ...]):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.variables = variables

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, op: str) -> None:
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}, found {val or 'end of input'!r}", off)
        self.pos += 1

    def parse(self) -> Node:
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {val!r}", off)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.pos += 1
                right = self.term()
                node = BinOp(val, node, right)
            else:
                return node

    def term(self) -> Node:
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.pos += 1
                right = self.factor()
                node = BinOp(val, node, right)
            else:
                return node

    def factor(self) -> Node:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.pos += 1
            return _neg(self.factor())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.pos += 1
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Node:
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            nxt_kind, nxt_val, _ = self.peek()
            if nxt_kind == "op" and nxt_val == "(":
                return self.call(val, off)
            if val in self.variables:
                return Var(val)
            if val in _UNARY_FUNCS or val == "sgnpow":
                raise ParseError(f"function {val!r} needs an argument list", off)
            raise ParseError(f"unknown identifier {val!r}", off)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected token {val or 'end of input'!r}", off)

    def call(self, name: str, off: int) -> Node:
        self.expect("(")
        if name in _UNARY_FUNCS:
            arg = self.expr()
            self.expect(")")
            return Call(name, arg)
        if name == "sgnpow":
            arg = self.expr()
            self.expect(",")
            kind, val, eoff = self.peek()
            exponent = _as_fraction(self.expr(), eoff)
            self.expect(")")
            return SgnPow(arg, exponent)
        raise ParseError(f"unknown function {name!r}", off)


def _as_fraction(node: Node, off: int) -> Fraction:
    if isinstance(node, Neg):
        return -_as_fraction(node.arg, off)
    if isinstance(node, Const):
        if node.value == int(node.value):
            return Fraction(int(node.value))
    if isinstance(node, BinOp) and node.op == "/":
        num, den = node.left, node.right
        if (
            isinstance(num, Const)
            and isinstance(den, Const)
            and num.value == int(num.value)
            and den.value == int(den.value)
            and int(den.value) != 0
        ):
            return Fraction(int(num.value), int(den.value))
    raise ParseError("sgnpow exponent must be an integer ratio like 1/3", off)


# ---------------------------------------------------------------------------
# Printing.  Precedence levels: +- (1), */ (2), unary minus (3), ^ (4),
# atoms (5).  Parenthesization is chosen so parse(str(e)) rebuilds the same
# tree, which the round-trip tests rely on.

_ADD, _MUL, _UNARY, _POW, _ATOM = 1, 2, 3, 4, 5


def _precedence(node: Node) -> int:
    if isinstance(node, Const):
        return _UNARY if node.value < 0 else _ATOM
    if isinstance(node, (Var, Call, SgnPow)):
        return _ATOM
    if isinstance(node, Neg):
        return _UNARY
    op = node.op  # type: ignore[union-attr]
    if op in "+-":
        return _ADD
    if op in "*/":
        return _MUL
    return _POW


def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _fmt(node: Node, minimum: int) -> str:
    prec = _precedence(node)
    if isinstance(node, Const):
        s = _fmt_number(node.value)
    elif isinstance(node, Var):
        s = node.name
    elif isinstance(node, Neg):
        s = "-" + _fmt(node.arg, _UNARY)
    elif isinstance(node, Call):
        s = f"{node.func}({_fmt(node.arg, _ADD)})"
    elif isinstance(node, SgnPow):
        e = node.exponent
        etxt = str(e.numerator) if e.denominator == 1 else f"{e.numerator}/{e.denominator}"
        s = f"sgnpow({_fmt(node.arg, _ADD)}, {etxt})"
    elif isinstance(node, BinOp):
        op = node.op
        if op == "^":
            s = f"{_fmt(node.left, _ATOM)}^{_fmt(node.right, _UNARY)}"
        elif op in "+-":
            s = f"{_fmt(node.left, _ADD)} {op} {_fmt(node.right, _MUL)}"
        else:
            s = f"{_fmt(node.left, _MUL)} {op} {_fmt(node.right, _UNARY)}"
    else:  # pragma: no cover
        raise TypeError(f"unknown node {node!r}")
    if prec < minimum:
        return f"({s})"
    return s


# ---------------------------------------------------------------------------
# Interpreted evaluation

def _eval(node: Node, env: Mapping[str, float]) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise DomainError(f"unbound variable {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        if node.op == "^":
            return _pow(a, _eval(node.right, env))
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0.0:
            raise DomainError("division by zero")
        return a / b
    if isinstance(node, Call):
        x = _eval(node.arg, env)
        if node.func == "sin":
            return math.sin(x)
        if node.func == "cos":
            return math.cos(x)
        if node.func == "exp":
            try:
                return math.exp(x)
            except OverflowError:
                raise DomainError("exp overflow") from None
        if node.func == "ln":
            if x <= 0.0:
                raise DomainError(f"ln of non-positive value {x!r}")
            return math.log(x)
        return abs(x)
    if isinstance(node, SgnPow):
        return signed_power(_eval(node.arg, env), node.exponent)
    raise TypeError(f"unknown node {node!r}")  # pragma: no cover


def _pow(base: float, exponent: float) -> float:
    if exponent == int(exponent):
        n = int(exponent)
        if base == 0.0 and n < 0:
            raise DomainError("zero base with negative exponent")
        try:
            return base**n
        except OverflowError:
            raise DomainError("power overflow") from None
    if base > 0.0:
        try:
            return base**exponent
        except OverflowError:
            raise DomainError("power overflow") from None
    if base == 0.0:
        if exponent > 0.0:
            return 0.0
        raise DomainError("zero base with negative exponent")
    raise DomainError("negative base with non-integer exponent; use sgnpow")


def signed_power(x: float, gamma: Fraction | float) -> float:
    """Signed power sign(x) * |x|^gamma; the odd-root reading of x^gamma."""
    if x == 0.0:
        return 0.0
    g = float(gamma)
    try:
        mag = abs(x) ** g
    except OverflowError:
        raise DomainError("power overflow") from None
    return math.copysign(mag, x)


def _check_finite(v: float) -> float:
    if math.isfinite(v):
        return v
    raise DomainError("non-finite result")


# ---------------------------------------------------------------------------
# Compilation to a plain Python callable (hot paths: quadrature, stepping)

def _codegen(node: Node, names: Mapping[str, str]) -> str:
    if isinstance(node, Const):
        return f"({node.value!r})"
    if isinstance(node, Var):
        return names[node.name]
    if isinstance(node, Neg):
        return f"(-{_codegen(node.arg, names)})"
    if isinstance(node, BinOp):
        a = _codegen(node.left, names)
        b = _codegen(node.right, names)
        if node.op == "^":
            r = node.right
            if isinstance(r, Const) and r.value == int(r.value):
                return f"({a} ** {int(r.value)})"
            return f"_pow({a}, {b})"
        return f"({a} {node.op} {b})"
    if isinstance(node, Call):
        a = _codegen(node.arg, names)
        if node.func == "abs":
            return f"abs({a})"
        fn = {"sin": "_sin", "cos": "_cos", "exp": "_exp", "ln": "_log"}[node.func]
        return f"{fn}({a})"
    if isinstance(node, SgnPow):
        return f"_sgnpow({_codegen(node.arg, names)}, {float(node.exponent)!r})"
    raise TypeError(f"unknown node {node!r}")  # pragma: no cover


def _compile(node: Node, variables: tuple[str, ...]) -> Callable[..., float]:
    names = {v: f"_a{i}" for i, v in enumerate(variables)}
    body = _codegen(node, names)
    args = ", ".join(names[v] for v in variables)
    src = (
        f"def _f({args}):\n"
        f"    try:\n"
        f"        return _chk({body})\n"
        f"    except DomainError:\n"
        f"        raise\n"
        f"    except (ZeroDivisionError, ValueError, OverflowError) as e:\n"
        f"        raise DomainError(str(e)) from None\n"
    )
    scope = {
        "_chk": _check_finite,
        "_pow": _pow,
        "_sgnpow": signed_power,
        "_sin": math.sin,
        "_cos": math.cos,
        "_exp": math.exp,
        "_log": math.log,
        "DomainError": DomainError,
    }
    exec(src, scope)  # noqa: S102 - generated from a closed grammar
    return scope["_f"]


# ---------------------------------------------------------------------------
# Differentiation (exact; abs and sgnpow are rejected)

def _diff(node: Node, var: str) -> Node:
    if isinstance(node, Const):
        return Const(0.0)
    if isinstance(node, Var):
        return Const(1.0 if node.name == var else 0.0)
    if isinstance(node, Neg):
        return Neg(_diff(node.arg, var))
    if isinstance(node, BinOp):
        u, v = node.left, node.right
        du, dv = _diff(u, var), _diff(v, var)
        if node.op == "+":
            return BinOp("+", du, dv)
        if node.op == "-":
            return BinOp("-", du, dv)
        if node.op == "*":
            return BinOp("+", BinOp("*", du, v), BinOp("*", u, dv))
        if node.op == "/":
            num = BinOp("-", BinOp("*", du, v), BinOp("*", u, dv))
            return BinOp("/", num, BinOp("^", v, Const(2.0)))
        # power rule when the exponent is constant, else b^e * (e' ln b + e b'/b)
        if isinstance(v, Const):
            scaled = BinOp("*", v, BinOp("^", u, Const(v.value - 1.0)))
            return BinOp("*", scaled, du)
        logterm = BinOp("+", BinOp("*", dv, Call("ln", u)), BinOp("*", v, BinOp("/", du, u)))
        return BinOp("*", node, logterm)
    if isinstance(node, Call):
        inner = _diff(node.arg, var)
        if node.func == "sin":
            outer: Node = Call("cos", node.arg)
        elif node.func == "cos":
            outer = Neg(Call("sin", node.arg))
        elif node.func == "exp":
            outer = node
        elif node.func == "ln":
            outer = BinOp("/", Const(1.0), node.arg)
        else:
            raise NonDifferentiableError("abs is not differentiable; supply the derivative explicitly")
        return BinOp("*", outer, inner)
    if isinstance(node, SgnPow):
        raise NonDifferentiableError("sgnpow is not differentiable; supply the derivative explicitly")
    raise TypeError(f"unknown node {node!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# Simplification: constant folding plus unit/zero identities.  Conservative:
# nothing that could widen the domain (0/x is not folded).

def _simplify(node: Node) -> Node:
    if isinstance(node, (Const, Var)):
        return node
    if isinstance(node, Neg):
        a = _simplify(node.arg)
        if isinstance(a, Const):
            return Const(-a.value)
        if isinstance(a, Neg):
            return a.arg
        return Neg(a)
    if isinstance(node, Call):
        a = _simplify(node.arg)
        if isinstance(a, Const):
            try:
                return Const(_eval(Call(node.func, a), {}))
            except DomainError:
                pass
        return Call(node.func, a)
    if isinstance(node, SgnPow):
        return SgnPow(_simplify(node.arg), node.exponent)
    a = _simplify(node.left)
    b = _simplify(node.right)
    op = node.op
    if isinstance(a, Const) and isinstance(b, Const):
        try:
            return Const(_eval(BinOp(op, a, b), {}))
        except DomainError:
            pass
    if op == "+":
        if isinstance(a, Const) and a.value == 0.0:
            return b
        if isinstance(b, Const) and b.value == 0.0:
            return a
    elif op == "-":
        if isinstance(b, Const) and b.value == 0.0:
            return a
        if isinstance(a, Const) and a.value == 0.0:
            return _neg(b) if not isinstance(b, Neg) else b.arg
    elif op == "*":
        if (isinstance(a, Const) and a.value == 0.0) or (isinstance(b, Const) and b.value == 0.0):
            return Const(0.0)
        if isinstance(a, Const) and a.value == 1.0:
            return b
        if isinstance(b, Const) and b.value == 1.0:
            return a
    elif op == "/":
        if isinstance(b, Const) and b.value == 1.0:
            return a
    elif op == "^":
        if isinstance(b, Const) and b.value == 1.0:
            return a
    return BinOp(op, a, b)


def _substitute(node: Node, mapping: Mapping[str, Node]) -> Node:
    if isinstance(node, Const):
        return node
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Neg):
        return Neg(_substitute(node.arg, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, _substitute(node.left, mapping), _substitute(node.right, mapping))
    if isinstance(node, Call):
        return Call(node.func, _substitute(node.arg, mapping))
    if isinstance(node, SgnPow):
        return SgnPow(_substitute(node.arg, mapping), node.exponent)
    raise TypeError(f"unknown node {node!r}")  # pragma: no cover


def _collect_vars(node: Node, out: list[str]) -> None:
    if isinstance(node, Var):
        if node.name not in out:
            out.append(node.name)
    elif isinstance(node, Neg):
        _collect_vars(node.arg, out)
    elif isinstance(node, BinOp):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, (Call, SgnPow)):
        _collect_vars(node.arg, out)


# ---------------------------------------------------------------------------
# Public wrapper

class Expression:
    """An expression tree together with its ordered argument list.

    ``variables`` fixes both the set of legal identifiers and the positional
    argument order of the compiled callable.
    """

    __slots__ = ("root", "variables", "_fn")

    def __init__(self, root: Node, variables: Iterable[str] = ("t",)):
        self.root = root
        self.variables = tuple(variables)
        self._fn: Callable[..., float] | None = None

    # construction -----------------------------------------------------
    @staticmethod
    def parse(text: str, variables: Iterable[str] = ("t",)) -> "Expression":
        variables = tuple(variables)
        root = _Parser(text, variables).parse()
        return Expression(root, variables)

    @staticmethod
    def constant(value: float) -> "Expression":
        return Expression(Const(float(value)), ())

    @staticmethod
    def variable(name: str = "t") -> "Expression":
        return Expression(Var(name), (name,))

    # evaluation -------------------------------------------------------
    def evaluate(self, **env: float) -> float:
        return _check_finite(_eval(self.root, env))

    def __call__(self, *args: float) -> float:
        if self._fn is None:
            self._fn = _compile(self.root, self.variables)
        return self._fn(*args)

    def compiled(self) -> Callable[..., float]:
        """Fast positional-argument callable (args follow ``variables``)."""
        if self._fn is None:
            self._fn = _compile(self.root, self.variables)
        return self._fn

    # calculus / rewriting ----------------------------------------------
    def derivative(self, var: str = "t") -> "Expression":
        return Expression(_simplify(_diff(self.root, var)), self.variables)

    def substitute(self, **mapping: "Expression | float") -> "Expression":
        nodes: dict[str, Node] = {}
        for name, val in mapping.items():
            nodes[name] = val.root if isinstance(val, Expression) else Const(float(val))
        root = _substitute(self.root, nodes)
        merged = [v for v in self.variables if v not in mapping]
        for val in mapping.values():
            if isinstance(val, Expression):
                for v in val.variables:
                    if v not in merged:
                        merged.append(v)
        used: list[str] = []
        _collect_vars(root, used)
        ordered = [v for v in merged if v in used] or used
        return Expression(root, tuple(ordered))

    def simplified(self) -> "Expression":
        return Expression(_simplify(self.root), self.variables)

    def is_zero(self) -> bool:
        r = _simplify(self.root)
        return isinstance(r, Const) and r.value == 0.0

    # operators ----------------------------------------------------------
    def _merge_vars(self, other: "Expression") -> tuple[str, ...]:
        out = list(self.variables)
        for v in other.variables:
            if v not in out:
                out.append(v)
        return tuple(out)

    @staticmethod
    def _coerce(value: "Expression | float") -> "Expression":
        if isinstance(value, Expression):
            return value
        return Expression.constant(value)

    def _binop(self, op: str, other: "Expression | float", flip: bool = False) -> "Expression":
        other = Expression._coerce(other)
        left, right = (other, self) if flip else (self, other)
        return Expression(BinOp(op, left.root, right.root), left._merge_vars(right))

    def __add__(self, other):
        return self._binop("+", other)

    def __radd__(self, other):
        return self._binop("+", other, flip=True)

    def __sub__(self, other):
        return self._binop("-", other)

    def __rsub__(self, other):
        return self._binop("-", other, flip=True)

    def __mul__(self, other):
        return self._binop("*", other)

    def __rmul__(self, other):
        return self._binop("*", other, flip=True)

    def __truediv__(self, other):
        return self._binop("/", other)

    def __rtruediv__(self, other):
        return self._binop("/", other, flip=True)

    def __pow__(self, other):
        return self._binop("^", other)

    def __neg__(self):
        return Expression(_neg(self.root), self.variables)

    def apply(self, func: str) -> "Expression":
        if func not in _UNARY_FUNCS:
            raise ValueError(f"unknown function {func!r}")
        return Expression(Call(func, self.root), self.variables)

    def sgnpow(self, exponent: Fraction) -> "Expression":
        return Expression(SgnPow(self.root, Fraction(exponent)), self.variables)

    # identity -----------------------------------------------------------
    def __str__(self) -> str:
        return _fmt(self.root, _ADD)

    def __repr__(self) -> str:
        return f"Expression({str(self)!r}, variables={self.variables!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Expression) and self.root == other.root

    def __hash__(self) -> int:
        return hash((Expression, str(self)))


def parse_expression(text: str, variables: Iterable[str] = ("t",)) -> Expression:
    """Parse ``text`` over the given variables; see the module grammar."""
    return Expression.parse(text, variables)


def differentiate(expr: Expression, var: str = "t") -> Expression:
    """Exact derivative of ``expr`` with respect to ``var``.

    Raises NonDifferentiableError if abs or sgnpow occur anywhere in the tree.
    """
    return expr.derivative(var)
