"""
Test-function corpus and a small arithmetic-expression language.

Grammar (whitespace insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := number | 'x' | name '(' expr (',' expr)* ')' | '(' expr ')'

Functions: exp, abs, sign, min, max, sinh. sign(0) = 0.
"""

import logging
import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.exceptions import DomainError, ExpressionSyntaxError, UnknownIdentifierError

logger = logging.getLogger(__name__)


# ----- AST -----


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: Tuple["Expr", ...]


Expr = Union[Num, Var, Neg, BinOp, Call]

# name -> (min arity, max arity or None for variadic)
FUNCTIONS: Dict[str, Tuple[int, Optional[int]]] = {
    "exp": (1, 1),
    "abs": (1, 1),
    "sign": (1, 1),
    "sinh": (1, 1),
    "min": (2, None),
    "max": (2, None),
}

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>\S))"
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int


def tokenize(src: str) -> List[Token]:
    tokens = []
    pos = 0
    while pos < len(src):
        match = _TOKEN.match(src, pos)
        if match is None:
            break
        kind = match.lastgroup
        tokens.append(Token(kind=kind, text=match.group(kind), offset=match.start(kind)))
        pos = match.end()
    tokens.append(Token(kind="end", text="", offset=len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = tokenize(src)
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def _advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _expect(self, text: str) -> Token:
        if self.current.text != text or self.current.kind != "op":
            raise ExpressionSyntaxError(f"expected '{text}'", self.current.offset)
        return self._advance()

    def parse(self) -> Expr:
        node = self._expr()
        if self.current.kind != "end":
            raise ExpressionSyntaxError(f"unexpected '{self.current.text}'", self.current.offset)
        return node

    def _expr(self) -> Expr:
        node = self._term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self._advance().text
            node = BinOp(op, node, self._term())
        return node

    def _term(self) -> Expr:
        node = self._unary()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self._advance().text
            node = BinOp(op, node, self._unary())
        return node

    def _unary(self) -> Expr:
        if self.current.kind == "op" and self.current.text == "-":
            self._advance()
            return Neg(self._unary())
        return self._power()

    def _power(self) -> Expr:
        base = self._primary()
        if self.current.kind == "op" and self.current.text == "^":
            self._advance()
            return BinOp("^", base, self._unary())
        return base

    def _primary(self) -> Expr:
        token = self.current
        if token.kind == "number":
            self._advance()
            return Num(float(token.text))
        if token.kind == "name":
            self._advance()
            if token.text == "x":
                return Var()
            if token.text not in FUNCTIONS:
                raise UnknownIdentifierError(f"unknown identifier '{token.text}'", token.offset)
            return self._call(token)
        if token.kind == "op" and token.text == "(":
            self._advance()
            node = self._expr()
            self._expect(")")
            return node
        if token.kind == "end":
            raise ExpressionSyntaxError("unexpected end of expression", token.offset)
        raise ExpressionSyntaxError(f"unexpected '{token.text}'", token.offset)

    def _call(self, name: Token) -> Expr:
        self._expect("(")
        args = [self._expr()]
        while self.current.kind == "op" and self.current.text == ",":
            self._advance()
            args.append(self._expr())
        self._expect(")")
        low, high = FUNCTIONS[name.text]
        if len(args) < low or (high is not None and len(args) > high):
            raise ExpressionSyntaxError(f"wrong number of arguments for {name.text}", name.offset)
        return Call(name.text, tuple(args))


def parse(src: str) -> Expr:
    """Parse an expression in x; raises ExpressionSyntaxError with the offending offset."""
    return _Parser(src).parse()


def _eval(node: Expr, x: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return np.full_like(x, node.value)
    if isinstance(node, Var):
        return x
    if isinstance(node, Neg):
        return -_eval(node.operand, x)
    if isinstance(node, BinOp):
        left = _eval(node.left, x)
        right = _eval(node.right, x)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            if np.any(right == 0):
                raise DomainError("division by zero")
            return left / right
        return np.power(left, right)
    if isinstance(node, Call):
        args = [_eval(arg, x) for arg in node.args]
        if node.name == "exp":
            return np.exp(args[0])
        if node.name == "abs":
            return np.abs(args[0])
        if node.name == "sign":
            return np.sign(args[0])
        if node.name == "sinh":
            return np.sinh(args[0])
        if node.name == "min":
            return np.minimum.reduce(args)
        if node.name == "max":
            return np.maximum.reduce(args)
    raise UnknownIdentifierError(f"cannot evaluate {node!r}", 0)


def evaluate_expr(expr: Expr, x) -> Union[float, np.ndarray]:
    """IEEE double evaluation; non-finite results raise DomainError."""
    arr = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        result = _eval(expr, arr)
    if not np.all(np.isfinite(result)):
        bad = np.atleast_1d(arr)[~np.isfinite(np.atleast_1d(result))]
        raise DomainError(f"expression is not finite at x={float(bad[0])!r}")
    return float(result) if result.ndim == 0 else result


def to_source(expr: Expr) -> str:
    """Fully parenthesised source; parse(to_source(e)) == e."""
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Var):
        return "x"
    if isinstance(expr, Neg):
        return f"(-{to_source(expr.operand)})"
    if isinstance(expr, BinOp):
        return f"({to_source(expr.left)}{expr.op}{to_source(expr.right)})"
    return f"{expr.name}({','.join(to_source(a) for a in expr.args)})"


@dataclass(frozen=True)
class CompiledExpression:
    """Callable wrapper so parsed expressions can be used wherever a function is."""

    source: str
    expr: Expr

    def __call__(self, x):
        return evaluate_expr(self.expr, x)


# ----- builtin corpus -----


def _x2sign(x):
    return x * np.abs(x)


def _xplus3(x):
    return np.maximum(x, 0.0) ** 3


def _quartic(x):
    return ((x + 1.0) / 2.0) ** 4 / 4.0


def _negcubic(x):
    return -(x**3)


def _twokinks(x):
    return (x - 0.25) * np.abs(x - 0.25) + (x + 0.5) * np.abs(x + 0.5)


BUILTINS: Dict[str, Callable] = {
    "exp": np.exp,
    "x2sign": _x2sign,
    "xplus3": _xplus3,
    "sinh": np.sinh,
    "quartic": _quartic,
    "negcubic": _negcubic,
    "twokinks": _twokinks,
}

# Builtins that are not 3-monotone on [-1, 1]
NEGATIVE_BUILTINS = frozenset({"negcubic"})

# 3-monotone corpus used by sweeps and tests
CORPUS = ("exp", "cubic(1,0,0,0)", "sinh", "x2sign", "xplus3", "quartic", "twokinks")

_CUBIC = re.compile(r"^\s*cubic\s*\(([^)]*)\)\s*$")


class FunctionSpec(BaseModel):
    """A builtin name (with parameters for cubic) or an expression string."""

    model_config = ConfigDict(frozen=True)

    text: str = Field(..., description="As given on the command line")
    builtin: Optional[str] = None
    params: Tuple[float, ...] = ()
    expression: Optional[str] = None
    negative: bool = Field(False, description="Flagged as not 3-monotone")


def resolve(text: str) -> Tuple[Callable, FunctionSpec]:
    """
    Turn a function description into a vectorised callable.

    Raises:
        ExpressionSyntaxError: malformed expression or cubic parameters
    """
    name = text.strip()
    if name in BUILTINS:
        spec = FunctionSpec(text=text, builtin=name, negative=name in NEGATIVE_BUILTINS)
        return BUILTINS[name], spec

    match = _CUBIC.match(text)
    if match:
        parts = [p.strip() for p in match.group(1).split(",")]
        try:
            c3, c2, c1, c0 = (float(p) for p in parts)
        except ValueError:
            raise ExpressionSyntaxError("cubic needs four numeric coefficients c3,c2,c1,c0", match.start(1))
        spec = FunctionSpec(text=text, builtin="cubic", params=(c3, c2, c1, c0), negative=c3 < 0)
        return np.polynomial.Polynomial([c0, c1, c2, c3]), spec

    expr = parse(text)
    logger.debug(f"Parsed expression {text!r} as {to_source(expr)}")
    return CompiledExpression(source=text, expr=expr), FunctionSpec(text=text, expression=text)
