from __future__ import annotations

import dataclasses as d
import re
import typing as t

from .syntax import ModelError

KEYWORDS = frozenset(
    {
        "system", "byte", "int", "input", "channel", "process", "state", "init",
        "trans", "guard", "effect", "sync", "true", "false", "ap", "ltl",
    }
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<directive>\#[A-Za-z_]+)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<string>"[^"\n]*")
  | (?P<op>->|\.\.|<=|>=|==|!=|&&|\|\||[-+*/%<>=!?@{}();,:])
    """,
    re.VERBOSE,
)


@d.dataclass(frozen=True)
class Token:
    kind: str  # int, ident, keyword, string, op, directive, eof
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ModelError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        assert kind is not None
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("ws", "comment"):
            pass
        else:
            value = m.group()
            if kind == "ident" and value in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, value, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def token_texts(text: str) -> list[str]:
    """Whitespace- and comment-insensitive token sequence, used for round-trip checks."""
    return [tok.text for tok in tokenize(text) if tok.kind != "eof"]


class TokenStream:
    def __init__(self, text: str) -> None:
        self.tokens = tokenize(text)
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def error(self, message: str, token: t.Optional[Token] = None) -> ModelError:
        tok = token or self.current
        found = tok.text or "end of input"
        return ModelError(f"{message} (found {found!r})", tok.line, tok.column)

    def accept(self, text: str) -> t.Optional[Token]:
        tok = self.current
        if tok.text == text and tok.kind in ("op", "keyword", "directive"):
            self.pos += 1
            return tok
        return None

    def expect(self, text: str) -> Token:
        tok = self.accept(text)
        if tok is None:
            raise self.error(f"expected {text!r}")
        return tok

    def expect_kind(self, kind: str, what: str) -> Token:
        tok = self.current
        if tok.kind != kind:
            raise self.error(f"expected {what}")
        self.pos += 1
        return tok

    def check(self, text: str) -> bool:
        return self.current.text == text and self.current.kind in ("op", "keyword", "directive")
