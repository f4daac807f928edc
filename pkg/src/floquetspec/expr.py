"""Scalar expression language for coefficients and kernels.

Grammar (whitespace is insignificant)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | 't' | 's' | 'pi' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := sin | cos | exp | cosh | sinh | sech | abs | sqrt

``^`` binds tighter than unary minus, so ``-t^2`` is ``-(t^2)``.  There is no
implicit multiplication.  Expressions are real-valued.

Trees are immutable; :func:`evaluate` works on Python floats,
:func:`evaluate_array` on numpy arrays, and :func:`compile_program` lowers a
tree to the postfix form consumed by the integration kernels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "Expr", "Num", "Var", "Const", "Neg", "BinOp", "Call",
    "ExprError", "ExprSyntaxError", "UnknownIdentifier", "UnboundVariable", "DomainError",
    "FUNCTIONS", "parse", "unparse", "evaluate", "evaluate_array", "free_vars",
    "compile_program", "to_callable", "is_zero_literal",
]

FUNCTIONS = ("sin", "cos", "exp", "cosh", "sinh", "sech", "abs", "sqrt")
VARIABLES = ("t", "s")


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, position: int, message: str):
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.message = message


class UnknownIdentifier(ExprSyntaxError):
    def __init__(self, position: int, name: str):
        super().__init__(position, f"unknown identifier {name!r}")
        self.name = name


class UnboundVariable(ExprError):
    pass


class DomainError(ExprError, ArithmeticError):
    pass


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float

    def __repr__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    name: str = "pi"

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Neg:
    operand: "Expr"

    def __repr__(self):
        return f"Neg({self.operand!r})"


_BINOP_NAMES = {"+": "Add", "-": "Sub", "*": "Mul", "/": "Div", "^": "Pow"}


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __repr__(self):
        return f"{_BINOP_NAMES[self.op]}({self.left!r},{self.right!r})"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"

    def __repr__(self):
        return f"Call({self.func},{self.arg!r})"


Expr = Union[Num, Var, Const, Neg, BinOp, Call]


# ----------------------------------------------------------------------- lexing


def _tokenize(src: str) -> list[tuple[str, object, int]]:
    tokens = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and src[j].isdigit():
                j += 1
            if j < n and src[j] == ".":
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    while k < n and src[k].isdigit():
                        k += 1
                    j = k
                else:
                    raise ExprSyntaxError(j, "malformed exponent in number")
            tokens.append(("num", float(src[i:j]), i))
            if j < n and (src[j].isalpha() or src[j] == "_"):
                raise ExprSyntaxError(j, "implicit multiplication is not allowed")
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(("name", src[i:j], i))
            i = j
            continue
        if c in "+-*/^()":
            tokens.append((c, c, i))
            i += 1
            continue
        raise ExprSyntaxError(i, f"unexpected character {c!r}")
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str):
        tok = self.advance()
        if tok[0] != kind:
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExprSyntaxError(tok[2], f"expected {kind!r}, found {found}")
        return tok

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(tok[2], f"unexpected token {tok[1]!r}")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[0] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, value, where = self.advance()
        if kind == "num":
            return Num(value)
        if kind == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if value in VARIABLES:
                return Var(value)
            if value == "pi":
                return Const("pi")
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            raise UnknownIdentifier(where, value)
        if kind == "end":
            raise ExprSyntaxError(where, "unexpected end of input")
        raise ExprSyntaxError(where, f"unexpected token {value!r}")


def parse(src: str) -> Expr:
    """Parse ``src`` into an expression tree.

    Raises :class:`ExprSyntaxError` (with a character position) on malformed
    input and :class:`UnknownIdentifier` for names outside the grammar.
    """
    if not isinstance(src, str) or not src.strip():
        raise ExprSyntaxError(0, "empty expression")
    return _Parser(src).parse()


# --------------------------------------------------------------------- unparse

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3
_ATOM_PREC = 5


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _NEG_PREC
    return _ATOM_PREC


def _wrap(e: Expr, cond: bool) -> str:
    s = unparse(e)
    return f"({s})" if cond else s


def unparse(e: Expr) -> str:
    """Render a tree with the minimal parentheses needed to re-parse it."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _prec(e.operand) < _NEG_PREC)
    if isinstance(e, Call):
        return f"{e.func}({unparse(e.arg)})"
    p = _PREC[e.op]
    if e.op == "^":
        left = _wrap(e.left, _prec(e.left) < _ATOM_PREC)
        right = _wrap(e.right, _prec(e.right) < _NEG_PREC)
        return f"{left}^{right}"
    left = _wrap(e.left, _prec(e.left) < p)
    right = _wrap(e.right, _prec(e.right) <= p)
    return f"{left} {e.op} {right}"


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Neg):
        return free_vars(e.operand)
    if isinstance(e, Call):
        return free_vars(e.arg)
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    return frozenset()


def is_zero_literal(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 0.0


# ------------------------------------------------------------------ evaluation


def _sech(x: float) -> float:
    a = math.exp(-abs(x))
    return 2.0 * a / (1.0 + a * a)


def _sqrt(x: float) -> float:
    if x < 0.0:
        raise DomainError(f"sqrt of negative number {x!r}")
    return math.sqrt(x)


def _pow(a: float, b: float) -> float:
    if a == 0.0 and b < 0.0:
        raise DomainError("zero raised to a negative power")
    if a < 0.0 and b != math.floor(b):
        raise DomainError(f"negative base {a!r} raised to non-integer power {b!r}")
    try:
        return math.pow(a, b)
    except OverflowError as exc:
        raise DomainError(f"overflow in {a!r}^{b!r}") from exc


def _div(a: float, b: float) -> float:
    if b == 0.0:
        raise DomainError("division by zero")
    return a / b


_SCALAR_FUNCS: dict[str, Callable[[float], float]] = {
    "sin": math.sin, "cos": math.cos, "exp": math.exp, "cosh": math.cosh,
    "sinh": math.sinh, "sech": _sech, "abs": abs, "sqrt": _sqrt,
}

_SCALAR_OPS: dict[str, Callable[[float, float], float]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
    "^": _pow,
}


def _check_finite(x: float) -> float:
    if not math.isfinite(x):
        raise DomainError(f"non-finite intermediate value {x!r}")
    return x


def evaluate(e: Expr, t: float | None = None, s: float | None = None) -> float:
    """Evaluate ``e`` in double precision with ``t`` and ``s`` bound."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        value = t if e.name == "t" else s
        if value is None:
            raise UnboundVariable(f"variable {e.name!r} is not bound")
        return float(value)
    if isinstance(e, Const):
        return math.pi
    if isinstance(e, Neg):
        return -evaluate(e.operand, t, s)
    if isinstance(e, Call):
        x = evaluate(e.arg, t, s)
        try:
            return _check_finite(_SCALAR_FUNCS[e.func](x))
        except OverflowError as exc:
            raise DomainError(f"overflow in {e.func}({x!r})") from exc
    a = evaluate(e.left, t, s)
    b = evaluate(e.right, t, s)
    return _check_finite(_SCALAR_OPS[e.op](a, b))


def _array_sech(x):
    a = np.exp(-np.abs(x))
    return 2.0 * a / (1.0 + a * a)


def _array_sqrt(x):
    if np.any(x < 0.0):
        raise DomainError("sqrt of negative number")
    return np.sqrt(x)


def _array_pow(a, b):
    a, b = np.broadcast_arrays(a, b)
    if np.any((a == 0.0) & (b < 0.0)):
        raise DomainError("zero raised to a negative power")
    if np.any((a < 0.0) & (b != np.floor(b))):
        raise DomainError("negative base raised to non-integer power")
    return np.power(a, b)


def _array_div(a, b):
    if np.any(np.asarray(b) == 0.0):
        raise DomainError("division by zero")
    return a / b


_ARRAY_FUNCS = {
    "sin": np.sin, "cos": np.cos, "exp": np.exp, "cosh": np.cosh,
    "sinh": np.sinh, "sech": _array_sech, "abs": np.abs, "sqrt": _array_sqrt,
}
_ARRAY_OPS = {
    "+": np.add, "-": np.subtract, "*": np.multiply, "/": _array_div, "^": _array_pow,
}


def _eval_array(e: Expr, t, s):
    if isinstance(e, Num):
        return np.float64(e.value)
    if isinstance(e, Var):
        value = t if e.name == "t" else s
        if value is None:
            raise UnboundVariable(f"variable {e.name!r} is not bound")
        return value
    if isinstance(e, Const):
        return np.float64(math.pi)
    if isinstance(e, Neg):
        return -_eval_array(e.operand, t, s)
    if isinstance(e, Call):
        return _ARRAY_FUNCS[e.func](_eval_array(e.arg, t, s))
    return _ARRAY_OPS[e.op](_eval_array(e.left, t, s), _eval_array(e.right, t, s))


def evaluate_array(e: Expr, t=None, s=None) -> np.ndarray:
    """Vectorised evaluation; ``t`` and ``s`` broadcast against each other."""
    t = None if t is None else np.asarray(t, dtype=float)
    s = None if s is None else np.asarray(s, dtype=float)
    with np.errstate(over="raise", invalid="raise", divide="raise", under="ignore"):
        try:
            out = _eval_array(e, t, s)
        except FloatingPointError as exc:
            raise DomainError(str(exc)) from exc
    shape = np.broadcast_shapes(*(np.shape(x) for x in (t, s) if x is not None))
    return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()


def to_callable(e: Expr) -> Callable[[float], float]:
    """Close ``e`` over Python callables for fast repeated scalar evaluation in ``t``."""
    if isinstance(e, Num):
        v = e.value
        return lambda t: v
    if isinstance(e, Var):
        if e.name != "t":
            raise UnboundVariable(f"variable {e.name!r} is not bound")
        return lambda t: t
    if isinstance(e, Const):
        return lambda t: math.pi
    if isinstance(e, Neg):
        f = to_callable(e.operand)
        return lambda t: -f(t)
    if isinstance(e, Call):
        g = _SCALAR_FUNCS[e.func]
        f = to_callable(e.arg)

        def call(t):
            try:
                return _check_finite(g(f(t)))
            except OverflowError as exc:
                raise DomainError(f"overflow in {e.func}") from exc
        return call
    op = _SCALAR_OPS[e.op]
    fl, fr = to_callable(e.left), to_callable(e.right)
    return lambda t: _check_finite(op(fl(t), fr(t)))


# ------------------------------------------------------------ postfix programs

# Opcodes shared with the compiled kernel; keep in sync with _ckernel.pyx.
MAX_PROGRAM_STACK = 64

OP_CONST, OP_T, OP_S = 0, 1, 2
OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW, OP_NEG = 3, 4, 5, 6, 7, 8
OP_SIN, OP_COS, OP_EXP, OP_COSH, OP_SINH, OP_SECH, OP_ABS, OP_SQRT = range(9, 17)

_BIN_OPCODES = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "^": OP_POW}
_FUNC_OPCODES = dict(zip(FUNCTIONS, range(OP_SIN, OP_SQRT + 1)))


def compile_program(e: Expr) -> tuple[list[int], list[float], int]:
    """Lower a tree to postfix ``(opcodes, constants, max_stack_depth)``.

    ``OP_CONST`` consumes the next entry of ``constants``.
    """
    codes: list[int] = []
    consts: list[float] = []

    def emit(node: Expr) -> int:
        if isinstance(node, Num):
            codes.append(OP_CONST)
            consts.append(node.value)
            return 1
        if isinstance(node, Const):
            codes.append(OP_CONST)
            consts.append(math.pi)
            return 1
        if isinstance(node, Var):
            codes.append(OP_T if node.name == "t" else OP_S)
            return 1
        if isinstance(node, Neg):
            d = emit(node.operand)
            codes.append(OP_NEG)
            return d
        if isinstance(node, Call):
            d = emit(node.arg)
            codes.append(_FUNC_OPCODES[node.func])
            return d
        dl = emit(node.left)
        dr = emit(node.right)
        codes.append(_BIN_OPCODES[node.op])
        return max(dl, dr + 1)

    depth = emit(e)
    return codes, consts, depth
