"""Tokenizer shared by the transformation and expression parsers."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import SyntaxErrorAt

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*|//[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<int>-?\d+)
  | (?P<ident>xmi:id|[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><>|->|\.\.|[{}()\[\];,:=.|*])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # ident | string | int | op | eof
    value: object
    line: int
    col: int

    def is_op(self, *ops: str) -> bool:
        return self.kind == "op" and self.value in ops

    def is_word(self, *words: str) -> bool:
        return self.kind == "ident" and self.value in words


def _unescape(body: str, line: int, col: int, source: str) -> str:
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            nxt = body[i + 1]
            if nxt not in _ESCAPES:
                raise SyntaxErrorAt(f"bad escape \\{nxt}", line, col, source)
            out.append(_ESCAPES[nxt])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def tokenize(text: str, source: str = "<input>") -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise SyntaxErrorAt(f"unexpected character {text[pos]!r}", line, col, source)
        kind = m.lastgroup
        raw = m.group()
        pos = m.end()
        if kind == "nl":
            line += 1
            line_start = pos
        elif kind in ("ws", "comment"):
            pass
        elif kind == "string":
            tokens.append(Token("string", _unescape(raw[1:-1], line, col, source), line, col))
        elif kind == "int":
            tokens.append(Token("int", int(raw), line, col))
        else:
            tokens.append(Token(kind, raw, line, col))
    tokens.append(Token("eof", None, line, pos - line_start + 1))
    return tokens


class TokenStream:
    def __init__(self, tokens: list[Token], source: str = "<input>"):
        self.tokens = tokens
        self.pos = 0
        self.source = source

    @property
    def peek(self) -> Token:
        return self.tokens[self.pos]

    def lookahead(self, n: int = 1) -> Token:
        return self.tokens[min(self.pos + n, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message: str, tok: Token | None = None) -> SyntaxErrorAt:
        tok = tok or self.peek
        return SyntaxErrorAt(message, tok.line, tok.col, self.source)

    def expect_op(self, op: str) -> Token:
        tok = self.peek
        if not tok.is_op(op):
            raise self.error(f"expected {op!r}, found {_describe(tok)}")
        return self.next()

    def expect_word(self, word: str) -> Token:
        tok = self.peek
        if not tok.is_word(word):
            raise self.error(f"expected {word!r}, found {_describe(tok)}")
        return self.next()

    def expect_ident(self, what: str = "identifier") -> str:
        tok = self.peek
        if tok.kind != "ident":
            raise self.error(f"expected {what}, found {_describe(tok)}")
        self.next()
        return tok.value  # type: ignore[return-value]

    def accept_op(self, op: str) -> bool:
        if self.peek.is_op(op):
            self.next()
            return True
        return False

    def accept_word(self, word: str) -> bool:
        if self.peek.is_word(word):
            self.next()
            return True
        return False


def _describe(tok: Token) -> str:
    if tok.kind == "eof":
        return "end of input"
    return f"{tok.value!r}"
