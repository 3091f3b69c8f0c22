"""
Top-down operator-precedence parser for the expression language.

Grammar (see docs/grammar.md):

    expr     := term (("+" | "-") term)*
    term     := unary (("*" | "/") unary)*
    unary    := "-" unary | primary
    primary  := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

A minus directly in front of a numeric literal is folded into the literal,
so "-1" parses to the constant -1. Whitespace is ignored. ``^`` is rejected;
powers are written ``pow(a, b)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from nedlin.expr.nodes import (
    BINARY_PREC,
    FUNCTION_ARITY,
    PREC_UNARY,
    Binary,
    Call,
    Constant,
    Unary,
    Variable,
)


class ExpressionSyntaxError(ValueError):
    """Malformed source. ``offset`` is a byte offset into the UTF-8 encoding."""

    def __init__(self, message: str, offset: int, expected: Iterable[str] = ()):
        self.offset = offset
        self.expected = tuple(sorted(set(expected)))
        hint = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at byte {offset}{hint}")


class UnknownFunctionError(ValueError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"Unknown function '{name}' at byte {offset}; known: {', '.join(sorted(FUNCTION_ARITY))}")


_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/(),])"
)

_OPERAND_START = ("number", "name", "'('", "'-'")


@dataclass(frozen=True)
class Token:
    kind: str  # number | name | op | end
    text: str
    offset: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    byte_pos = 0
    while pos < len(source):
        match = _TOKEN.match(source, pos)
        if match is None:
            char = source[pos]
            if char == "^":
                raise ExpressionSyntaxError("'^' is not an operator, use pow(a, b)", byte_pos, ["pow"])
            raise ExpressionSyntaxError(f"Unexpected character {char!r}", byte_pos, ["operator", *_OPERAND_START])
        text = match.group()
        if match.lastgroup != "ws":
            tokens.append(Token(match.lastgroup or "op", text, byte_pos))
        pos = match.end()
        byte_pos += len(text.encode("utf-8"))
    tokens.append(Token("end", "", byte_pos))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.index = 0

    @property
    def token(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def expect(self, text: str) -> Token:
        if self.token.text != text or self.token.kind == "end":
            raise ExpressionSyntaxError(self._describe(self.token), self.token.offset, [f"'{text}'"])
        return self.advance()

    @staticmethod
    def _describe(tok: Token) -> str:
        return "Unexpected end of input" if tok.kind == "end" else f"Unexpected token {tok.text!r}"

    def _lbp(self, tok: Token) -> int:
        if tok.kind == "op" and tok.text in BINARY_PREC:
            return BINARY_PREC[tok.text]
        return 0

    def expression(self, rbp: int = 0):
        left = self.nud(self.advance())
        while rbp < self._lbp(self.token):
            op = self.advance()
            right = self.expression(BINARY_PREC[op.text])
            left = Binary(op=op.text, left=left, right=right)
        return left

    def nud(self, tok: Token):
        if tok.kind == "number":
            return Constant(value=float(tok.text))
        if tok.kind == "name":
            if self.token.text == "(" and self.token.kind == "op":
                return self._call(tok)
            if tok.text in FUNCTION_ARITY:
                raise ExpressionSyntaxError(f"Function '{tok.text}' needs arguments", self.token.offset, ["'('"])
            return Variable(name=tok.text)
        if tok.kind == "op" and tok.text == "-":
            if self.token.kind == "number":
                literal = self.advance()
                return Constant(value=-float(literal.text))
            return Unary(operand=self.expression(PREC_UNARY))
        if tok.kind == "op" and tok.text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        raise ExpressionSyntaxError(self._describe(tok), tok.offset, _OPERAND_START)

    def _call(self, name: Token):
        if name.text not in FUNCTION_ARITY:
            raise UnknownFunctionError(name.text, name.offset)
        self.expect("(")
        args = [self.expression(0)]
        while self.token.kind == "op" and self.token.text == ",":
            self.advance()
            args.append(self.expression(0))
        if not (self.token.kind == "op" and self.token.text == ")"):
            raise ExpressionSyntaxError(self._describe(self.token), self.token.offset, ["','", "')'"])
        self.advance()
        low, high = FUNCTION_ARITY[name.text]
        if not low <= len(args) <= high:
            raise ExpressionSyntaxError(
                f"Function '{name.text}' takes {low if low == high else f'{low}+'} argument(s), got {len(args)}",
                name.offset,
            )
        return Call(name=name.text, args=tuple(args))

    def parse(self):
        if self.token.kind == "end":
            raise ExpressionSyntaxError("Empty expression", self.token.offset, _OPERAND_START)
        tree = self.expression(0)
        if self.token.kind != "end":
            raise ExpressionSyntaxError(self._describe(self.token), self.token.offset, ["operator", "end of input"])
        return tree


def parse_tree(source: str):
    """Parse ``source`` into a bare AST node."""
    return _Parser(source).parse()
