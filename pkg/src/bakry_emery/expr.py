"""Closed-form scalar expressions over chart coordinates, evaluated as 2-jets.

Grammar (precedence ``^`` > unary minus > ``* /`` > ``+ -``, ``^`` right-assoc)::

    expr  := term (('+'|'-') term)*
    term  := factor (('*'|'/') factor)*
    factor:= ('-')? power
    power := atom ('^' factor)?
    atom  := number | ident | ident '(' expr ')' | '(' expr ')'

Derivatives are exact: every node is evaluated in the truncated second-order
Taylor algebra (value, gradient, Hessian), i.e. forward-mode AD on
hyper-dual numbers.  Finite differences are never used here.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Expression",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "DomainError",
    "Jet",
    "Jet2",
    "parse_expr",
    "eval_jet",
    "constant",
    "FUNCTIONS",
    "CONSTANTS",
]


class ExprSyntaxError(ValueError):
    """Malformed expression source; ``offset`` is a UTF-8 byte offset."""

    def __init__(self, message: str, source: str, index: int):
        self.offset = len(source[:index].encode("utf-8"))
        self.source = source
        super().__init__(f"{message} at byte offset {self.offset}")


class UnknownIdentifierError(ValueError):
    def __init__(self, name: str, coords: Sequence[str]):
        self.name = name
        super().__init__(
            f"unknown identifier {name!r} (chart coordinates: {', '.join(coords)})"
        )


class DomainError(ArithmeticError):
    """Expression evaluated outside the domain of one of its operations."""


CONSTANTS = {"pi": math.pi, "e": math.e}


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str
    index: int


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = "Num | Const | Var | Neg | BinOp | Call"


def _source(node) -> str:
    if isinstance(node, Num):
        text = repr(float(node.value))
        return f"({text})" if node.value < 0 else text
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({_source(node.left)} {node.op} {_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({_source(node.arg)})"
    raise TypeError(node)


def _free(node, acc: set) -> set:
    if isinstance(node, Var):
        acc.add(node.index)
    elif isinstance(node, Neg):
        _free(node.operand, acc)
    elif isinstance(node, BinOp):
        _free(node.left, acc)
        _free(node.right, acc)
    elif isinstance(node, Call):
        _free(node.arg, acc)
    return acc


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            bad = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", source, bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, coords: Sequence[str]):
        self.source = source
        self.coords = list(coords)
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, self.source, tok[2])

    def expect(self, value):
        tok = self.take()
        if tok[1] != value or tok[0] != "op":
            self.fail(f"expected {value!r}", tok)
        return tok

    def parse(self):
        if self.peek()[0] == "end":
            self.fail("empty expression")
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        if self.peek() == ("op", "-", self.peek()[2]):
            self.take()
            inner = self.power()
            if isinstance(inner, Num):
                return Num(-inner.value)
            return Neg(inner)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def atom(self):
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifierError(text, self.coords)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in self.coords:
                return Var(text, self.coords.index(text))
            if text in CONSTANTS:
                return Const(text)
            m = re.fullmatch(r"x(\d+)", text)
            if m and int(m.group(1)) < len(self.coords):
                k = int(m.group(1))
                return Var(self.coords[k], k)
            raise UnknownIdentifierError(text, self.coords)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.fail("unexpected end of expression", tok)
        self.fail(f"unexpected token {text!r}", tok)


# ---------------------------------------------------------------------------
# Jets
# ---------------------------------------------------------------------------


class Jet:
    """Truncated Taylor jet (value, gradient, Hessian); ``h`` is None at order 1."""

    __slots__ = ("v", "g", "h")

    def __init__(self, v, g, h=None):
        self.v = v
        self.g = g
        self.h = h

    def _lift(self, c):
        return Jet(c, np.zeros_like(self.g), None if self.h is None else np.zeros_like(self.h))

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v + other, self.g, self.h)
        h = None if self.h is None else self.h + other.h
        return Jet(self.v + other.v, self.g + other.g, h)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.g, None if self.h is None else -self.h)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v * other, self.g * other, None if self.h is None else self.h * other)
        g = self.v * other.g + other.v * self.g
        h = None
        if self.h is not None:
            cross = np.outer(self.g, other.g)
            h = self.v * other.h + other.v * self.h + cross + cross.T
        return Jet(self.v * other.v, g, h)

    __rmul__ = __mul__

    def chain(self, f0, f1, f2):
        """Compose with a scalar function having derivatives f0, f1, f2 at ``v``."""
        h = None
        if self.h is not None:
            h = f1 * self.h + f2 * np.outer(self.g, self.g)
        return Jet(f0, f1 * self.g, h)


@dataclass(frozen=True)
class Jet2:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def _unary(name: str, x: float, need_derivs: bool):
    """Return (f, f', f'') of a builtin function at x."""
    if name == "exp":
        e = math.exp(x)
        return e, e, e
    if name == "log":
        if x <= 0:
            raise DomainError(f"log of nonpositive value {x!r}")
        return math.log(x), 1.0 / x, -1.0 / (x * x)
    if name == "sin":
        s, c = math.sin(x), math.cos(x)
        return s, c, -s
    if name == "cos":
        s, c = math.sin(x), math.cos(x)
        return c, -s, -c
    if name == "tan":
        if math.cos(x) == 0.0:
            raise DomainError("tan at a pole")
        t = math.tan(x)
        sec2 = 1.0 + t * t
        return t, sec2, 2.0 * t * sec2
    if name == "sinh":
        return math.sinh(x), math.cosh(x), math.sinh(x)
    if name == "cosh":
        return math.cosh(x), math.sinh(x), math.cosh(x)
    if name == "tanh":
        t = math.tanh(x)
        s = 1.0 - t * t
        return t, s, -2.0 * t * s
    if name == "sqrt":
        if x < 0 or (x == 0 and need_derivs):
            raise DomainError(f"sqrt of {x!r}")
        r = math.sqrt(x)
        if not need_derivs:
            return r, 0.0, 0.0
        return r, 0.5 / r, -0.25 / (r * x)
    if name == "abs":
        if x == 0 and need_derivs:
            raise DomainError("abs is not differentiable at 0")
        return abs(x), math.copysign(1.0, x), 0.0
    raise KeyError(name)


FUNCTIONS = ("exp", "log", "sin", "cos", "tan", "sinh", "cosh", "tanh", "sqrt", "abs")


def _pow_const(base: float, c: float, need_derivs: bool):
    is_int = float(c).is_integer()
    if base < 0 and not is_int:
        raise DomainError(f"negative base {base!r} to non-integer power {c!r}")
    if base == 0:
        if c < 0:
            raise DomainError("division by zero in power")
        if need_derivs and not is_int and c < 2:
            raise DomainError("power not twice differentiable at 0")
    f0 = base ** c
    if not need_derivs:
        return f0, 0.0, 0.0
    f1 = c * base ** (c - 1) if c != 0 else 0.0
    f2 = c * (c - 1) * base ** (c - 2) if c not in (0.0, 1.0) else 0.0
    return f0, f1, f2


def _value(node, p) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return p[node.index]
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -_value(node.operand, p)
    if isinstance(node, Call):
        return _unary(node.func, _value(node.arg, p), False)[0]
    a = _value(node.left, p)
    b = _value(node.right, p)
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise DomainError("division by zero")
        return a / b
    if not _free(node.right, set()):
        return _pow_const(a, b, False)[0]
    if a <= 0:
        raise DomainError("non-constant power of a nonpositive base")
    return math.exp(b * math.log(a))


def _jet(node, seeds, order):
    """Evaluate node as a Jet, or a plain float when it is constant."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return seeds[node.index]
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -_jet(node.operand, seeds, order)
    if isinstance(node, Call):
        x = _jet(node.arg, seeds, order)
        if not isinstance(x, Jet):
            return _unary(node.func, x, False)[0]
        return x.chain(*_unary(node.func, x.v, True))
    a = _jet(node.left, seeds, order)
    b = _jet(node.right, seeds, order)
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if isinstance(b, Jet):
            if b.v == 0:
                raise DomainError("division by zero")
            inv = b.chain(1.0 / b.v, -1.0 / b.v**2, 2.0 / b.v**3)
            return a * inv
        if b == 0:
            raise DomainError("division by zero")
        return a * (1.0 / b)
    # power
    if not isinstance(b, Jet):
        if not isinstance(a, Jet):
            return _pow_const(a, b, False)[0]
        return a.chain(*_pow_const(a.v, b, True))
    av = a.v if isinstance(a, Jet) else a
    if av <= 0:
        raise DomainError("non-constant power of a nonpositive base")
    if not isinstance(a, Jet):
        la = math.log(a)
        prod = b * la
    else:
        prod = b * a.chain(math.log(av), 1.0 / av, -1.0 / (av * av))
    return prod.chain(*(math.exp(prod.v),) * 3)


class Expression:
    """Immutable parsed expression bound to an ordered coordinate list."""

    __slots__ = ("root", "coords", "_free")

    def __init__(self, root, coords: Sequence[str]):
        self.root = root
        self.coords = tuple(coords)
        self._free = frozenset(_free(root, set()))

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def free_indices(self) -> frozenset:
        return self._free

    @property
    def is_constant(self) -> bool:
        return not self._free

    def is_zero(self) -> bool:
        return self.is_constant and _value(self.root, ()) == 0.0

    def to_source(self) -> str:
        return _source(self.root)

    def __str__(self) -> str:
        return self.to_source()

    def __repr__(self) -> str:
        return f"Expression({self.to_source()!r}, coords={self.coords})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Expression) and self.root == other.root and self.coords == other.coords

    def __hash__(self) -> int:
        return hash((self.root, self.coords))

    def value(self, point) -> float:
        if len(point) != self.n:
            raise ValueError(f"point has dimension {len(point)}, chart has {self.n}")
        try:
            return float(_value(self.root, point))
        except (OverflowError, ZeroDivisionError) as exc:
            raise DomainError(str(exc)) from exc

    def jet(self, point, order: int = 2) -> Jet:
        """Raw jet at ``point``; ``order`` 1 skips the Hessian."""
        n = self.n
        if len(point) != n:
            raise ValueError(f"point has dimension {len(point)}, chart has {n}")
        eye = np.eye(n)
        seeds = [
            Jet(float(point[k]), eye[k], np.zeros((n, n)) if order >= 2 else None)
            for k in range(n)
        ]
        try:
            out = _jet(self.root, seeds, order)
        except (OverflowError, ZeroDivisionError) as exc:
            raise DomainError(str(exc)) from exc
        if not isinstance(out, Jet):
            out = Jet(float(out), np.zeros(n), np.zeros((n, n)) if order >= 2 else None)
        return out

    # structural builders used by model transformations
    def map_root(self, fn) -> "Expression":
        return Expression(fn(self.root), self.coords)


def constant(value: float, coords: Sequence[str]) -> Expression:
    return Expression(Num(float(value)), coords)


def parse_expr(source: str, coords: Sequence[str]) -> Expression:
    """Parse ``source`` into an :class:`Expression` over ``coords``."""
    coords = list(coords)
    for c in coords:
        if c in FUNCTIONS:
            raise ValueError(f"coordinate name {c!r} shadows a function")
    return Expression(_Parser(source, coords).parse(), coords)


def eval_jet(expr: Expression, point) -> Jet2:
    """Value, gradient and Hessian of ``expr`` at ``point``."""
    j = expr.jet(np.asarray(point, dtype=float), order=2)
    return Jet2(float(j.v), np.array(j.g, dtype=float), np.array(j.h, dtype=float))
