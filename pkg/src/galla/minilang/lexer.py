from __future__ import annotations

import re
from dataclasses import dataclass

KEYWORDS = frozenset(
    {"def", "return", "if", "else", "while", "for", "in", "and", "or", "not", "True", "False"}
)
LAYOUT = frozenset({"NEWLINE", "INDENT", "DEDENT", "EOF"})

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\r?\n)
  | (?P<number>[0-9]+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>==|[-+*/<=(),:])
    """,
    re.VERBOSE,
)


class MiniSyntaxError(SyntaxError):
    """Invalid MiniLang source; carries 1-based line and column."""

    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{msg} (line {line}, column {col})")
        self.msg = msg
        self.lineno = line
        self.offset = col
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # NAME NUMBER KEYWORD OP NEWLINE INDENT DEDENT EOF
    text: str
    begin: int
    end: int
    line: int
    col: int


def _line_col(source: str, pos: int) -> tuple[int, int]:
    line = source.count("\n", 0, pos) + 1
    col = pos - (source.rfind("\n", 0, pos) + 1) + 1
    return line, col


def tokenize(source: str) -> list[Token]:
    """Split source into tokens, synthesizing NEWLINE/INDENT/DEDENT like Python."""
    tokens: list[Token] = []
    indents = [0]
    depth = 0
    pos = 0
    at_line_start = True
    n = len(source)

    while pos < n:
        if at_line_start and depth == 0:
            # Measure indentation; skip blank and comment-only lines entirely.
            m = re.compile(r"[ \t]*").match(source, pos)
            width_text = m.group(0)
            after = m.end()
            if after >= n or source[after] in "\r\n#":
                nl = source.find("\n", after)
                pos = n if nl < 0 else nl + 1
                continue
            if "\t" in width_text:
                line, col = _line_col(source, pos + width_text.index("\t"))
                raise MiniSyntaxError("tab in indentation", line, col)
            width = len(width_text)
            line, col = _line_col(source, after)
            if width > indents[-1]:
                indents.append(width)
                tokens.append(Token("INDENT", "", after, after, line, col))
            else:
                while width < indents[-1]:
                    indents.pop()
                    tokens.append(Token("DEDENT", "", after, after, line, col))
                if width != indents[-1]:
                    raise MiniSyntaxError("inconsistent dedent", line, col)
            pos = after
            at_line_start = False
            continue

        m = _TOKEN_RE.match(source, pos)
        if m is None:
            line, col = _line_col(source, pos)
            raise MiniSyntaxError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group(0)
        line, col = _line_col(source, pos)
        if kind == "newline":
            if depth == 0:
                tokens.append(Token("NEWLINE", "", pos, pos, line, col))
                at_line_start = True
        elif kind == "number":
            tokens.append(Token("NUMBER", text, pos, m.end(), line, col))
        elif kind == "name":
            tokens.append(Token("KEYWORD" if text in KEYWORDS else "NAME", text, pos, m.end(), line, col))
        elif kind == "op":
            if text == "(":
                depth += 1
            elif text == ")":
                depth = max(0, depth - 1)
            tokens.append(Token("OP", text, pos, m.end(), line, col))
        pos = m.end()

    line, col = _line_col(source, n)
    if tokens and tokens[-1].kind not in ("NEWLINE", "DEDENT", "INDENT"):
        tokens.append(Token("NEWLINE", "", n, n, line, col))
    while len(indents) > 1:
        indents.pop()
        tokens.append(Token("DEDENT", "", n, n, line, col))
    tokens.append(Token("EOF", "", n, n, line, col))
    return tokens


def count_tokens(source: str) -> int:
    """Number of non-layout tokens; the length measure used for corpus filtering."""
    return sum(1 for t in tokenize(source) if t.kind not in LAYOUT)
