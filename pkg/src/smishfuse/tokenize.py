"""Word tokenization shared by the TF-IDF streams and the hash encoder.

Tokens are maximal runs of Unicode alphanumerics, lowercased. Two kinds of
marker produced by the tagging layer survive as single, case-preserved tokens:
bracketed placeholders such as ``[URL]`` and appended ``country=<Name>``
suffixes. Everything else (punctuation, symbols, underscores) is a boundary.
"""

from __future__ import annotations

import re

PLACEHOLDER_TOKENS = (
    "[URL]",
    "[EMAIL]",
    "[PHONE]",
    "[GPE]",
    "[ORG]",
    "[MONEY]",
    "[legitimate_like]",
    "[smishing_like]",
)

_PLACEHOLDER_ALT = "|".join(re.escape(t) for t in PLACEHOLDER_TOKENS)

TOKEN_RE = re.compile(rf"{_PLACEHOLDER_ALT}|country=\S+|[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Split ``text`` into stream tokens (see module docstring)."""
    out = []
    for tok in TOKEN_RE.findall(text):
        if tok.startswith("[") or tok.startswith("country="):
            out.append(tok)
        else:
            out.append(tok.lower())
    return out
