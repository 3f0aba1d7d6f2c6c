"""Tokenizer and precedence-climbing parser for the expression grammar.

Grammar::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := ('-' | '+') unary | power
    power    := atom ('^' exponent)?
    exponent := '-'? (INT | '(' expr ')') ('^' exponent)?
    atom     := INT | IDENT | 'sqrt' '(' expr ')' | '(' expr ')'

``^`` binds tightest and is right-associative; exponents must reduce to
rational constants.  Identifiers match ``[a-z][a-z0-9]*``.
"""

from __future__ import annotations

import re
from typing import NamedTuple

import sympy as sp

from .errors import ExpressionSyntaxError, UnknownSymbol
from .frame import CoordinateFrame

_TOKEN = re.compile(r"\s*(?:(?P<int>\d+)|(?P<ident>[a-z][a-z0-9]*)|(?P<op>[-+*/^()]))")

ATOM_START = frozenset({"integer", "identifier", "sqrt", "(", "-", "+"})


class Token(NamedTuple):
    kind: str  # "int", "ident", "op", "end"
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            bad = len(text) - len(text[pos:].lstrip())
            raise ExpressionSyntaxError(f"unexpected character {text[bad]!r}", bad, ATOM_START)
        kind = m.lastgroup
        tokens.append(Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, frame: CoordinateFrame):
        self.tokens = tokenize(text)
        self.i = 0
        self.frame = frame

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.kind == "op" and self.tok.text == text

    def expect(self, text: str, expected=None):
        if not self.at(text):
            raise ExpressionSyntaxError(
                f"expected {text!r}, found {self._describe()}", self.tok.pos, expected or {text}
            )
        return self.advance()

    def _describe(self) -> str:
        return "end of input" if self.tok.kind == "end" else repr(self.tok.text)

    def parse(self):
        e = self.expr()
        if self.tok.kind != "end":
            raise ExpressionSyntaxError(
                f"unexpected {self._describe()}", self.tok.pos, {"+", "-", "*", "/", "^", "end"}
            )
        return e

    def expr(self):
        e = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.unary()
        while self.at("*") or self.at("/"):
            op = self.advance()
            rhs = self.unary()
            if op.text == "*":
                e = e * rhs
            else:
                if rhs == 0:
                    raise ExpressionSyntaxError("division by literal zero", op.pos)
                e = e / rhs
        return e

    def unary(self):
        if self.at("-"):
            self.advance()
            return -self.unary()
        if self.at("+"):
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.at("^"):
            self.advance()
            exp = self.exponent()
            if base == 0 and exp < 0:
                raise ExpressionSyntaxError("zero raised to a negative power", self.tok.pos)
            return sp.Pow(base, exp)
        return base

    def exponent(self):
        start = self.tok.pos
        negate = False
        if self.at("-"):
            self.advance()
            negate = True
        if self.tok.kind == "int":
            value = sp.Integer(self.advance().text)
        elif self.at("("):
            self.advance()
            value = self.expr()
            self.expect(")", {")", "+", "-", "*", "/", "^"})
        else:
            raise ExpressionSyntaxError(
                f"exponent must be an integer or a parenthesized rational, found {self._describe()}",
                self.tok.pos,
                {"integer", "(", "-"},
            )
        if self.at("^"):
            self.advance()
            value = sp.Pow(value, self.exponent())
        if negate:
            value = -value
        if not value.is_Rational:
            raise ExpressionSyntaxError("exponent is not a rational constant", start)
        return value

    def atom(self):
        t = self.tok
        if t.kind == "int":
            self.advance()
            return sp.Integer(t.text)
        if t.kind == "ident":
            self.advance()
            if t.text == "sqrt":
                self.expect("(", {"("})
                arg = self.expr()
                self.expect(")", {")", "+", "-", "*", "/", "^"})
                return sp.sqrt(arg)
            if t.text not in self.frame:
                raise UnknownSymbol(t.text, t.pos)
            return self.frame.symbol(t.text)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")", {")", "+", "-", "*", "/", "^"})
            return e
        raise ExpressionSyntaxError(f"unexpected {self._describe()}", t.pos, ATOM_START)


def parse_expression(text: str, frame: CoordinateFrame) -> sp.Expr:
    """Parse ``text`` into an exact expression over the symbols of ``frame``.

    Integer literals and quotients of literals stay exact rationals.

    >>> from ocfactor.frame import CoordinateFrame
    >>> parse_expression("q1^2 + (4/3)*q1^3", CoordinateFrame(("q1",), ("state",)))
    4*q1**3/3 + q1**2
    """
    return _Parser(text, frame).parse()
