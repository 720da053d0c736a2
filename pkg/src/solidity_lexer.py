"""Tokenizer for the Solidity subset understood by the parser.

Every character of the input ends up either in a token or in a whitespace
gap between tokens, so the original text can always be rebuilt with
reconstruct(). Characters the grammar does not know become single-character
punctuation tokens instead of errors.
"""

import logging
import re
from dataclasses import dataclass
from typing import List

logger = logging.getLogger(__name__)

IDENTIFIER = "identifier"
KEYWORD = "keyword"
PUNCTUATION = "punctuation"
NUMBER = "number-literal"
STRING = "string-literal"
COMMENT = "comment"

KEYWORDS = frozenset({
    "pragma", "import", "contract", "interface", "library", "abstract", "is",
    "function", "modifier", "event", "constructor", "fallback", "receive",
    "mapping", "struct", "enum", "error", "using", "for", "if", "else", "while",
    "do", "return", "returns", "emit", "public", "private", "internal",
    "external", "view", "pure", "payable", "constant", "immutable", "override",
    "virtual", "memory", "storage", "calldata", "indexed", "anonymous", "new",
    "delete", "true", "false", "assembly", "unchecked", "try", "catch", "break",
    "continue", "throw", "var",
})

_ELEMENTARY_TYPE_RE = re.compile(r"^(address|bool|string|byte|bytes\d*|u?int\d*|u?fixed[\dx]*)$")

# Multi-character operators must come before their one-character prefixes.
_OPERATORS = [
    ">>>=", "<<=", ">>=", ">>>", "**=",
    "==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "|=",
    "&=", "^=", "++", "--", "=>", "<<", ">>", "**", "->", ":=",
]

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<comment>//[^\n]*|/\*.*?(?:\*/|\Z))"
    r"|(?P<string>\"(?:\\.|[^\"\\\n])*(?:\"|$)|'(?:\\.|[^'\\\n])*(?:'|$))"
    r"|(?P<number>0[xX][0-9a-fA-F_]*|(?:\d[\d_]*(?:\.\d[\d_]*)?|\.\d[\d_]*)(?:[eE][-+]?\d+)?)"
    r"|(?P<word>[A-Za-z_$][A-Za-z0-9_$]*)"
    r"|(?P<op>" + "|".join(re.escape(op) for op in _OPERATORS) + r")"
    r"|(?P<other>.)",
    re.DOTALL | re.MULTILINE,
)


@dataclass(frozen=True)
class SourceToken:
    """One lexical token with its 1-based position."""

    kind: str
    text: str
    line: int
    column: int
    offset: int

    def is_(self, text: str) -> bool:
        return self.kind not in (STRING, COMMENT) and self.text == text


def is_elementary_type(word: str) -> bool:
    return bool(_ELEMENTARY_TYPE_RE.match(word))


def tokenize(source: str) -> List[SourceToken]:
    """Split Solidity source into tokens.

    Args:
        source: Contract source text.

    Returns:
        Tokens in source order, comments included.
    """
    tokens: List[SourceToken] = []
    line = 1
    line_start = 0

    for match in _TOKEN_RE.finditer(source):
        group = match.lastgroup
        text = match.group()
        start = match.start()

        if group != "ws":
            if group == "comment":
                kind = COMMENT
            elif group == "string":
                kind = STRING
            elif group == "number":
                kind = NUMBER
            elif group == "word":
                kind = KEYWORD if text in KEYWORDS or is_elementary_type(text) else IDENTIFIER
            else:
                kind = PUNCTUATION
            tokens.append(SourceToken(kind, text, line, start - line_start + 1, start))

        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = start + text.rindex("\n") + 1

    logger.debug(f"Tokenized {len(source)} chars into {len(tokens)} tokens")
    return tokens


def reconstruct(tokens: List[SourceToken], source: str) -> str:
    """Rebuild the source from tokens plus the whitespace between them."""
    parts = []
    cursor = 0
    for token in tokens:
        gap = source[cursor:token.offset]
        if gap.strip():
            raise ValueError(f"Non-whitespace text dropped at offset {cursor}")
        parts.append(gap)
        parts.append(token.text)
        cursor = token.offset + len(token.text)
    tail = source[cursor:]
    if tail.strip():
        raise ValueError(f"Non-whitespace text dropped at offset {cursor}")
    parts.append(tail)
    return "".join(parts)
