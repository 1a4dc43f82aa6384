"""Grammar-light tokenization of source lines.

Produces leaf tokens with a kind, exact text, and 1-based line index. Kinds
are limited to {ident, number, string, op, punct}; per-language keyword
tables are exposed separately for callers that need them (rename
classification, clone normalization). Tokenization is per line, so malformed
or multi-line constructs degrade gracefully instead of failing.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

KEYWORDS: dict[str, frozenset[str]] = {
    "python": frozenset(
        """False None True and as assert async await break class continue def
        del elif else except finally for from global if import in is lambda
        nonlocal not or pass raise return try while with yield match case""".split()
    ),
    "go": frozenset(
        """break case chan const continue default defer else fallthrough for
        func go goto if import interface map package range return select
        struct switch type var""".split()
    ),
    "java": frozenset(
        """abstract assert boolean break byte case catch char class const
        continue default do double else enum extends final finally float for
        goto if implements import instanceof int interface long native new
        package private protected public return short static strictfp super
        switch synchronized this throw throws transient try void volatile
        while var record sealed permits yield true false null""".split()
    ),
    "javascript": frozenset(
        """break case catch class const continue debugger default delete do
        else export extends finally for function if import in instanceof let
        new of return static super switch this throw try typeof var void
        while with yield async await true false null undefined""".split()
    ),
}
KEYWORDS["typescript"] = KEYWORDS["javascript"] | frozenset(
    """interface type enum namespace declare readonly abstract implements
    private protected public is keyof infer as satisfies any unknown never
    string number boolean""".split()
)

FUNC_KEYWORDS = {
    "python": frozenset({"def"}),
    "go": frozenset({"func"}),
    "java": frozenset(),
    "javascript": frozenset({"function"}),
    "typescript": frozenset({"function"}),
}

_TOKEN_RE = re.compile(
    r"""
    (?P<string>'(?:\\.|[^'\\])*'|"(?:\\.|[^"\\])*"|`(?:\\.|[^`\\])*`)
  | (?P<number>\d[\w.]*)
  | (?P<ident>[A-Za-z_$][\w$]*)
  | (?P<op><<=|>>=|\*\*=|//=|===|!==|\.\.\.|->|=>|<=|>=|==|!=|&&|\|\||<<|>>|\+\+|--|\+=|-=|\*=|/=|%=|&=|\|=|\^=|:=|\*\*|//)
  | (?P<punct>[^\sA-Za-z0-9_$])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class SyntaxToken:
    kind: str
    text: str
    line: int  # 1-based
    col: int = 0  # 0-based character offset within the line

    @property
    def key(self) -> tuple[str, str]:
        return (self.kind, self.text)


def tokenize_line(text: str, line_no: int = 1) -> list[SyntaxToken]:
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup or "punct"
        tokens.append(SyntaxToken(kind=kind, text=m.group(), line=line_no, col=m.start()))
    return tokens


def tokenize(source: list[str] | tuple[str, ...], language: str = "python") -> list[SyntaxToken]:
    """Leaf tokens of all lines, in source order. ``language`` currently only
    selects keyword semantics downstream; the lexer itself is shared."""
    tokens: list[SyntaxToken] = []
    for i, line in enumerate(source):
        tokens.extend(tokenize_line(line, i + 1))
    return tokens


def is_keyword(text: str, language: str) -> bool:
    return text in KEYWORDS.get(language, frozenset())


def normalize_tokens(tokens: list[SyntaxToken], language: str) -> list[str]:
    """Token stream with identifiers collapsed to a placeholder; keywords,
    literals, and punctuation stay distinct. Used for clone similarity."""
    out = []
    for t in tokens:
        if t.kind == "ident" and not is_keyword(t.text, language):
            out.append("\x00id")
        else:
            out.append(t.text)
    return out
