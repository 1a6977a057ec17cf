"""Condition language used by contract fields such as ``autonomous_if``.

Grammar (whitespace insignificant)::

    expr  := or
    or    := and ("||" and)*
    and   := not ("&&" not)*
    not   := "!" not | cmp
    cmp   := term (("<=" | ">=" | "<" | ">" | "==" | "!=") term)?
    term  := identifier | number | string | "true" | "false" | "(" expr ")"

Comparisons do not chain. There are no function calls or arithmetic; new
operators belong in ``_CMP_OPS`` plus the evaluator in :mod:`intentc.predicates`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Union

Span = tuple[int, int]
Number = Union[int, Fraction]


class ConditionSyntaxError(ValueError):
    def __init__(self, message: str, position: int, text: str = ""):
        super().__init__(f"{message} at position {position}")
        self.message = message
        self.position = position
        self.text = text


@dataclass(frozen=True)
class Ident:
    name: str
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Num:
    value: Number
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Str:
    value: str
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class BoolLit:
    value: bool
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Not:
    operand: Expr
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class And:
    operands: tuple[Expr, ...]
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Or:
    operands: tuple[Expr, ...]
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Compare:
    op: str
    left: Expr
    right: Expr
    span: Span = field(default=(0, 0), compare=False)


Expr = Union[Ident, Num, Str, BoolLit, Not, And, Or, Compare]
ATOMS = (Ident, Num, Str, BoolLit)

_CMP_OPS = ("<=", ">=", "==", "!=", "<", ">")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<op>&&|\|\||<=|>=|==|!=|<|>|!|\(|\))
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    start: int
    end: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ConditionSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), m.start(), m.end()))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text), len(text)))
    return tokens


def _parse_number(text: str) -> Number:
    value = Fraction(text)
    return value.numerator if value.denominator == 1 else value


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", r"\1", body)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok: _Token | None = None) -> ConditionSyntaxError:
        tok = tok or self.peek()
        return ConditionSyntaxError(message, tok.start, self.text)

    def expect_op(self, text: str) -> _Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise self.error(f"expected {text!r}, found {found}")
        return self.advance()

    def at_op(self, *texts: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text in texts

    def parse(self) -> Expr:
        expr = self.parse_or()
        if self.peek().kind != "eof":
            raise self.error(f"unexpected {self.peek().text!r}")
        return expr

    def parse_or(self) -> Expr:
        start = self.peek().start
        items = [self.parse_and()]
        while self.at_op("||"):
            self.advance()
            items.append(self.parse_and())
        if len(items) == 1:
            return items[0]
        return Or(tuple(items), (start, self.tokens[self.i - 1].end))

    def parse_and(self) -> Expr:
        start = self.peek().start
        items = [self.parse_not()]
        while self.at_op("&&"):
            self.advance()
            items.append(self.parse_not())
        if len(items) == 1:
            return items[0]
        return And(tuple(items), (start, self.tokens[self.i - 1].end))

    def parse_not(self) -> Expr:
        if self.at_op("!"):
            tok = self.advance()
            operand = self.parse_not()
            return Not(operand, (tok.start, self.tokens[self.i - 1].end))
        return self.parse_cmp()

    def parse_cmp(self) -> Expr:
        start = self.peek().start
        left = self.parse_term()
        if not self.at_op(*_CMP_OPS):
            return left
        op = self.advance().text
        right = self.parse_term()
        if self.at_op(*_CMP_OPS):
            raise self.error("chained comparison")
        return Compare(op, left, right, (start, self.tokens[self.i - 1].end))

    def parse_term(self) -> Expr:
        tok = self.peek()
        span = (tok.start, tok.end)
        if tok.kind == "ident":
            self.advance()
            if tok.text == "true":
                return BoolLit(True, span)
            if tok.text == "false":
                return BoolLit(False, span)
            return Ident(tok.text, span)
        if tok.kind == "number":
            self.advance()
            return Num(_parse_number(tok.text), span)
        if tok.kind == "string":
            self.advance()
            return Str(_unescape(tok.text[1:-1]), span)
        if self.at_op("("):
            self.advance()
            inner = self.parse_or()
            self.expect_op(")")
            return inner
        if tok.kind == "eof":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected {tok.text!r}")


def parse_condition(text: str) -> Expr:
    """Parse a condition string into an expression tree.

    Raises :class:`ConditionSyntaxError` carrying the offending character offset.
    """
    return _Parser(text).parse()


# Printing -------------------------------------------------------------------


def _format_number(value: Number) -> str:
    if isinstance(value, int):
        return str(value)
    num, den = value.numerator, value.denominator
    # Literals come from finite decimals, so the denominator is 2^a * 5^b.
    scale = 0
    while (10**scale) % den:
        scale += 1
        if scale > 64:
            raise ValueError(f"{value} has no finite decimal form")
    digits = abs(num) * (10**scale // den)
    whole, frac = divmod(digits, 10**scale)
    sign = "-" if num < 0 else ""
    return f"{sign}{whole}.{str(frac).rjust(scale, '0').rstrip('0') or '0'}"


def _format_string(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_source(expr: Expr) -> str:
    """Render an expression so that ``parse_condition(to_source(e)) == e``."""
    if isinstance(expr, Ident):
        return expr.name
    if isinstance(expr, BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, Num):
        return _format_number(expr.value)
    if isinstance(expr, Str):
        return _format_string(expr.value)
    if isinstance(expr, Not):
        inner = to_source(expr.operand)
        if isinstance(expr.operand, (And, Or)):
            inner = f"({inner})"
        return "!" + inner
    if isinstance(expr, And):
        return " && ".join(
            f"({to_source(x)})" if isinstance(x, (And, Or)) else to_source(x) for x in expr.operands
        )
    if isinstance(expr, Or):
        return " || ".join(f"({to_source(x)})" if isinstance(x, Or) else to_source(x) for x in expr.operands)
    if isinstance(expr, Compare):
        sides = [to_source(x) if isinstance(x, ATOMS) else f"({to_source(x)})" for x in (expr.left, expr.right)]
        return f"{sides[0]} {expr.op} {sides[1]}"
    raise TypeError(f"not an expression: {expr!r}")


# Tree utilities -------------------------------------------------------------


def walk(expr: Expr) -> Iterator[Expr]:
    yield expr
    if isinstance(expr, Not):
        yield from walk(expr.operand)
    elif isinstance(expr, (And, Or)):
        for x in expr.operands:
            yield from walk(x)
    elif isinstance(expr, Compare):
        yield from walk(expr.left)
        yield from walk(expr.right)


def identifiers(expr: Expr) -> list[str]:
    """Identifier names in first-occurrence order."""
    seen: dict[str, None] = {}
    for node in walk(expr):
        if isinstance(node, Ident):
            seen.setdefault(node.name)
    return list(seen)


def transform(expr: Expr, fn: Callable[[Expr], Expr]) -> Expr:
    """Rebuild ``expr`` bottom-up, applying ``fn`` to every node."""
    if isinstance(expr, Not):
        expr = Not(transform(expr.operand, fn), expr.span)
    elif isinstance(expr, And):
        expr = And(tuple(transform(x, fn) for x in expr.operands), expr.span)
    elif isinstance(expr, Or):
        expr = Or(tuple(transform(x, fn) for x in expr.operands), expr.span)
    elif isinstance(expr, Compare):
        expr = Compare(expr.op, transform(expr.left, fn), transform(expr.right, fn), expr.span)
    return fn(expr)


def conjuncts(expr: Expr) -> tuple[Expr, ...]:
    return expr.operands if isinstance(expr, And) else (expr,)


def conjoin(*exprs: Expr) -> Expr:
    parts: list[Expr] = []
    for e in exprs:
        parts.extend(conjuncts(e))
    return parts[0] if len(parts) == 1 else And(tuple(parts))


def disjoin(*exprs: Expr) -> Expr:
    parts: list[Expr] = []
    for e in exprs:
        parts.extend(e.operands if isinstance(e, Or) else (e,))
    return parts[0] if len(parts) == 1 else Or(tuple(parts))
