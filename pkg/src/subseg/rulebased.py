"""Count Chars: greedy rule-based segmentation under a character limit.

Words are packed into a line until the next word (plus its separating
space) would overflow ``limit``; the break goes before that word.  Each
break is ``<eol>`` with probability ``eol_prob`` and ``<eob>`` otherwise,
except that a block never gets a third line.  The sentence always ends
with ``<eob>``.

Randomness comes from numpy's PCG64 generator.  One uniform draw in
[0, 1) is consumed per inserted break (including breaks forced to
``<eob>``); the sentence-final ``<eob>`` consumes none.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import EOB, EOL, SegmentedSentence
from .errors import SubsegError


class WordExceedsLimit(SubsegError):
    def __init__(self, word: str, limit: int):
        self.word = word
        super().__init__(f"word {word!r} has {len(word)} characters, limit is {limit}")


class EmptyInput(SubsegError):
    pass


@dataclass(frozen=True)
class CountCharsConfig:
    limit: int = 42
    eol_prob: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.limit < 1:
            raise SubsegError(f"limit must be >= 1, got {self.limit}")
        if not 0.0 <= self.eol_prob <= 1.0:
            raise SubsegError(f"eol_prob must be in [0, 1], got {self.eol_prob}")


def sentence_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for sentence ``index`` of a corpus segmented with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def count_chars_segment(words: Sequence[str], cfg: CountCharsConfig,
                        rng: np.random.Generator) -> SegmentedSentence:
    if not words:
        raise EmptyInput("nothing to segment")
    out: list[str] = []
    line_len = 0
    last_break = None
    for word in words:
        if len(word) > cfg.limit:
            raise WordExceedsLimit(word, cfg.limit)
        if not out:
            out.append(word)
            line_len = len(word)
            continue
        if line_len + 1 + len(word) > cfg.limit:
            u = rng.random()
            kind = EOL if (u < cfg.eol_prob and last_break != EOL) else EOB
            out.append(kind)
            last_break = kind
            out.append(word)
            line_len = len(word)
        else:
            out.append(word)
            line_len += 1 + len(word)
    out.append(EOB)
    return SegmentedSentence(tuple(out))


def segment_sentences(sentences: Sequence[Sequence[str]], cfg: CountCharsConfig,
                      threads: int = 1) -> list[SegmentedSentence]:
    """Segment many word sequences; sentence ``i`` uses the stream ``(seed, i)``."""

    def one(item):
        i, words = item
        return count_chars_segment(words, cfg, sentence_rng(cfg.seed, i))

    items = list(enumerate(sentences))
    if threads <= 1:
        return [one(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, items))
