"""Parsing and evaluation of nonlinearities f(v1, ..., vn) on the positive cone.

Grammar (whitespace-insensitive, no implicit multiplication):

    expr     := term (('+' | '-') term)*
    term     := factor (('*' | '/') factor)*
    factor   := atom ('^' exponent)*
    atom     := NUMBER | 'v'<k> | 'exp' '(' expr ')' | '(' expr ')'
    exponent := ['-'] NUMBER | '(' ['-'] NUMBER ')'

'+', '-', '*' and '/' associate to the left; exponents must be real
literals.  Power conventions: 0^0 = 1, 0^p = 0 for p > 0, 0^p for p < 0
overflows to +inf (rejected by the strict evaluator).  A negative base
with a non-integral exponent evaluates to NaN, which the strict
evaluator likewise rejects.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Union

import numpy as np


class ExpressionError(ValueError):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (position {position})")
        self.position = position


class UnknownIdentifierError(ExpressionError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r} (position {position})")
        self.name = name
        self.position = position


class VariableIndexError(ExpressionError):
    def __init__(self, index: int, n: int, position: int):
        super().__init__(
            f"variable v{index} out of range for {n} component(s) (position {position})"
        )
        self.index = index
        self.position = position


class EvaluationRangeError(ExpressionError):
    """The expression produced a negative, NaN or infinite value."""


# ---------------------------------------------------------------------------
# Syntax tree


@dataclass(frozen=True)
class Const:
    value: float

    def __str__(self) -> str:
        return repr(self.value)


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written in the source text

    def __str__(self) -> str:
        return f"v{self.index}"


@dataclass(frozen=True)
class Binary:
    op: str  # one of '+', '-', '*', '/'
    left: "Node"
    right: "Node"

    def __str__(self) -> str:
        prec = _PRECEDENCE[self.op]
        left = str(self.left)
        right = str(self.right)
        if _node_precedence(self.left) < prec:
            left = f"({left})"
        # left-associative: an equal-precedence right child needs parentheses
        # to survive a print/parse round trip structurally unchanged
        if _node_precedence(self.right) <= prec:
            right = f"({right})"
        return f"{left} {self.op} {right}"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: float

    def __str__(self) -> str:
        base = str(self.base)
        if _node_precedence(self.base) < _POW_PRECEDENCE:
            base = f"({base})"
        if self.exponent < 0:
            return f"{base}^({self.exponent!r})"
        return f"{base}^{self.exponent!r}"


@dataclass(frozen=True)
class Exp:
    arg: "Node"

    def __str__(self) -> str:
        return f"exp({self.arg})"


Node = Union[Const, Var, Binary, Pow, Exp]

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}
_POW_PRECEDENCE = 3
_ATOM_PRECEDENCE = 4


def _node_precedence(node: Node) -> int:
    if isinstance(node, Binary):
        return _PRECEDENCE[node.op]
    if isinstance(node, Pow):
        return _POW_PRECEDENCE
    return _ATOM_PRECEDENCE


def to_string(ast: Node) -> str:
    return str(ast)


def max_var_index(ast: Node) -> int:
    if isinstance(ast, Var):
        return ast.index
    if isinstance(ast, Binary):
        return max(max_var_index(ast.left), max_var_index(ast.right))
    if isinstance(ast, Pow):
        return max_var_index(ast.base)
    if isinstance(ast, Exp):
        return max_var_index(ast.arg)
    return 0


# ---------------------------------------------------------------------------
# Lexer / parser


class _Token(NamedTuple):
    kind: str  # 'num', 'ident', 'op', 'end'
    text: str
    pos: int


_NUMBER_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_VAR_RE = re.compile(r"v(\d+)\Z")
_OPS = set("+-*/^()")


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPS:
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        m = _NUMBER_RE.match(text, i)
        if m:
            tokens.append(_Token("num", m.group(), i))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(_Token("ident", m.group(), i))
            i = m.end()
            continue
        raise ExpressionSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], n: int):
        self.tokens = tokens
        self.n = n
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> _Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            raise ExpressionSyntaxError(f"expected {op!r}", tok.pos)
        return self.advance()

    def parse_expr(self) -> Node:
        node = self.parse_term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = Binary(op, node, self.parse_term())
        return node

    def parse_term(self) -> Node:
        node = self.parse_factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = Binary(op, node, self.parse_factor())
        return node

    def parse_factor(self) -> Node:
        node = self.parse_atom()
        while self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            node = Pow(node, self.parse_exponent())
        return node

    def parse_exponent(self) -> float:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            value = self._signed_number()
            self.expect_op(")")
            return value
        return self._signed_number()

    def _signed_number(self) -> float:
        sign = 1.0
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            sign = -1.0
            tok = self.peek()
        if tok.kind != "num":
            raise ExpressionSyntaxError("exponent must be a real literal", tok.pos)
        self.advance()
        return sign * float(tok.text)

    def parse_atom(self) -> Node:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Const(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if tok.text == "exp":
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return Exp(arg)
            m = _VAR_RE.match(tok.text)
            if m:
                index = int(m.group(1))
                if not 1 <= index <= self.n:
                    raise VariableIndexError(index, self.n, tok.pos)
                return Var(index)
            raise UnknownIdentifierError(tok.text, tok.pos)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ExpressionSyntaxError("expected a number, variable or '('", tok.pos)


def parse(text: str, n: int) -> Node:
    """Parse ``text`` into a syntax tree with variables v1..vn."""
    if n < 1:
        raise ValueError("component count must be at least 1")
    parser = _Parser(_tokenize(text), n)
    node = parser.parse_expr()
    tail = parser.peek()
    if tail.kind != "end":
        raise ExpressionSyntaxError(f"unexpected trailing input {tail.text!r}", tail.pos)
    return node


# ---------------------------------------------------------------------------
# Stack-machine compilation (shared by all evaluation backends)

OP_CONST = 0
OP_VAR = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_POW = 6
OP_EXP = 7


class Tapes(NamedTuple):
    """Flattened postfix programs for a system of n expressions."""

    ops: np.ndarray  # int64, shape (n, L)
    args: np.ndarray  # float64, shape (n, L)
    lengths: np.ndarray  # int64, shape (n,)
    stack_need: int


@lru_cache(maxsize=512)
def compile_tape(ast: Node) -> tuple[tuple[int, ...], tuple[float, ...], int]:
    ops: list[int] = []
    args: list[float] = []

    def emit(node: Node) -> int:
        if isinstance(node, Const):
            ops.append(OP_CONST)
            args.append(float(node.value))
            return 1
        if isinstance(node, Var):
            ops.append(OP_VAR)
            args.append(float(node.index - 1))  # 0-based slot used at runtime
            return 1
        if isinstance(node, Binary):
            dl = emit(node.left)
            dr = emit(node.right)
            ops.append({"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}[node.op])
            args.append(0.0)
            return max(dl, dr + 1)
        if isinstance(node, Pow):
            d = emit(node.base)
            ops.append(OP_POW)
            args.append(float(node.exponent))
            return d
        if isinstance(node, Exp):
            d = emit(node.arg)
            ops.append(OP_EXP)
            args.append(0.0)
            return d
        raise TypeError(f"not an expression node: {node!r}")

    depth = emit(ast)
    return tuple(ops), tuple(args), depth


def pack_tapes(asts: tuple[Node, ...], n: int) -> Tapes:
    """Pack per-component tapes into rectangular arrays for the kernels."""
    compiled = [compile_tape(a) for a in asts]
    lengths = np.array([len(c[0]) for c in compiled], dtype=np.int64)
    width = max(1, int(lengths.max()))
    ops = np.zeros((len(compiled), width), dtype=np.int64)
    args = np.zeros((len(compiled), width), dtype=np.float64)
    for i, (o, a, _) in enumerate(compiled):
        ops[i, : len(o)] = o
        args[i, : len(a)] = a
    for ast in asts:
        if max_var_index(ast) > n:
            raise VariableIndexError(max_var_index(ast), n, 0)
    stack_need = max(c[2] for c in compiled)
    return Tapes(ops, args, lengths, stack_need)


def _eval_tape_scalar(ops, args, length, v) -> float:
    stack = np.empty(max(int(length), 1))
    top = -1
    with np.errstate(all="ignore"):
        for k in range(length):
            op = ops[k]
            if op == OP_CONST:
                top += 1
                stack[top] = args[k]
            elif op == OP_VAR:
                top += 1
                stack[top] = v[int(args[k])]
            elif op == OP_ADD:
                stack[top - 1] = stack[top - 1] + stack[top]
                top -= 1
            elif op == OP_SUB:
                stack[top - 1] = stack[top - 1] - stack[top]
                top -= 1
            elif op == OP_MUL:
                stack[top - 1] = stack[top - 1] * stack[top]
                top -= 1
            elif op == OP_DIV:
                stack[top - 1] = stack[top - 1] / stack[top]
                top -= 1
            elif op == OP_POW:
                stack[top] = np.power(stack[top], args[k])
            else:  # OP_EXP
                stack[top] = np.exp(stack[top])
    return float(stack[0])


def evaluate_raw(ast: Node, v) -> float:
    """Evaluate without range checks; may return NaN, inf or negatives."""
    values = np.asarray(v, dtype=float)
    ops, args, _ = compile_tape(ast)
    if max_var_index(ast) > values.shape[0]:
        raise VariableIndexError(max_var_index(ast), values.shape[0], 0)
    return _eval_tape_scalar(ops, args, len(ops), values)


def evaluate(ast: Node, v) -> float:
    """Evaluate at a nonnegative point; the result must be finite and >= 0."""
    values = np.asarray(v, dtype=float)
    if values.ndim != 1:
        raise ValueError("evaluation point must be a 1-D vector")
    if np.any(values < 0):
        raise ValueError("evaluation point must be componentwise nonnegative")
    result = evaluate_raw(ast, values)
    if not np.isfinite(result):
        raise EvaluationRangeError(f"expression evaluated to {result} at v={values.tolist()}")
    if result < 0:
        raise EvaluationRangeError(f"expression evaluated to negative value {result} at v={values.tolist()}")
    return result


# ---------------------------------------------------------------------------
# Runtime validation of positivity assumptions

_SQRT_PRIMES = (2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0)


@dataclass
class NonnegReport:
    samples: int
    violations: list  # (point as tuple, value) pairs; value may be NaN/inf
    min_positive: float  # min f over sampled points with ||v|| > 0
    h2_positive: bool

    @property
    def ok(self) -> bool:
        return not self.violations


def _sample_direction(k: int, n: int) -> np.ndarray:
    # every (n+1)-th sample walks the coordinate axes so that boundary rays
    # (where positivity most often fails) are probed exactly
    if n > 1 and k % (n + 1) < n:
        d = np.zeros(n)
        d[k % (n + 1)] = 1.0
        return d
    raw = np.empty(n)
    for j in range(n):
        a = _SQRT_PRIMES[j % len(_SQRT_PRIMES)] ** 0.5
        raw[j] = ((k + 1) * a) % 1.0
    s = raw.sum()
    if s <= 0:
        raw[:] = 1.0
        s = float(n)
    return raw / s


def validate_nonneg(ast: Node, n: int, radius: float, samples: int) -> NonnegReport:
    """Probe H1/H2 behaviour on a deterministic sample of the ball ||v|| <= radius.

    Reported, not certified: a clean report is sampled evidence only.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if samples < 1:
        raise ValueError("need at least one sample")
    violations = []
    min_positive = np.inf
    points = [np.zeros(n)]
    for k in range(samples):
        r = radius * (k + 1) / samples
        points.append(r * _sample_direction(k, n))
    for point in points:
        value = evaluate_raw(ast, point)
        if not np.isfinite(value) or value < 0:
            violations.append((tuple(point.tolist()), value))
            continue
        if point.sum() > 0:
            min_positive = min(min_positive, value)
    if not np.isfinite(min_positive):
        min_positive = np.nan
    return NonnegReport(
        samples=len(points),
        violations=violations,
        min_positive=float(min_positive),
        h2_positive=bool(np.isfinite(min_positive) and min_positive > 0),
    )
