"""The mteval-v13a tokenizer, with subtitle breaks kept as atomic tokens."""

from __future__ import annotations

import re

from ..corpus import BREAKS

_SYMBOLS = re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])")
# Lookarounds instead of consuming the neighbour character: runs such as
# "..5" are split consistently and the tokenizer is idempotent.
_NONDIGIT_PUNCT = re.compile(r"(?<=[^0-9])([\.,])")
_PUNCT_NONDIGIT = re.compile(r"([\.,])(?=[^0-9])")
_DIGIT_DASH = re.compile(r"(?<=[0-9])(-)")
_SPACES = re.compile(r"\s+")
_BREAK_SPLIT = re.compile(r"(?:(?<=\s)|^)(<eol>|<eob>)(?=\s|$)")


def _tokenize_plain(text: str) -> list[str]:
    norm = text.replace("<skipped>", "")
    norm = norm.replace("-\n", "")
    norm = norm.replace("\n", " ")
    norm = norm.replace("&quot;", '"')
    norm = norm.replace("&amp;", "&")
    norm = norm.replace("&lt;", "<")
    norm = norm.replace("&gt;", ">")

    norm = f" {norm} "
    norm = _SYMBOLS.sub(r" \1 ", norm)
    norm = _NONDIGIT_PUNCT.sub(r" \1 ", norm)
    norm = _PUNCT_NONDIGIT.sub(r" \1 ", norm)
    norm = _DIGIT_DASH.sub(r" \1 ", norm)
    return _SPACES.sub(" ", norm).split()


def tokenize_13a(text: str, protect_breaks: bool = True) -> list[str]:
    """Tokenize ``text`` the way sacreBLEU's ``13a`` tokenizer does (case kept).

    Standalone ``<eol>``/``<eob>`` tokens survive intact when
    ``protect_breaks`` is set; otherwise they are split like any other
    text containing ``<`` and ``>``.
    """
    if not protect_breaks:
        return _tokenize_plain(text)
    parts = _BREAK_SPLIT.split(text)
    tokens: list[str] = []
    for k, part in enumerate(parts):
        if k % 2:
            tokens.append(part)
        elif part:
            tokens.extend(_tokenize_plain(part))
    return tokens


def is_break_token(tok: str) -> bool:
    return tok in BREAKS
