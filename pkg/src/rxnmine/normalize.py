"""Argument string normalization used for matching and scoring.

Both training-label matching and evaluation compare arguments through this
single function so the two sides can never drift apart.
"""

import re

_WS = re.compile(r"\s+")
_BRACKET_PAIRS = {"(": ")", "[": "]", "{": "}"}
_TRAILING_PUNCT = ".,;:!?"


def normalize_argument(s: str) -> str:
    """Lowercase, collapse whitespace, strip one enclosing bracket layer and
    trailing sentence punctuation."""
    s = s.strip()
    if len(s) >= 2 and s[0] in _BRACKET_PAIRS and s[-1] == _BRACKET_PAIRS[s[0]]:
        s = s[1:-1].strip()
    s = s.rstrip(_TRAILING_PUNCT).strip()
    s = _WS.sub(" ", s)
    return s.lower()
