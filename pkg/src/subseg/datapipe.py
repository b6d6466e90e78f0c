"""Corpus preparation for subtitle-segmentation training data.

Filtering by line length, random ``<eob>`` -> ``<eol>`` substitution for
corpora that lost their line breaks, balancing of single- and
multi-subtitle sentences, and removal of breaks to obtain model inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .corpus import EOB, EOL, Corpus, SegmentedSentence, line_length, split_lines, strip_breaks
from .rulebased import sentence_rng


@dataclass
class PipelineStats:
    input_sentences: int = 0
    kept_sentences: int = 0
    substituted_breaks: int = 0
    eligible_breaks: int = 0
    multi_subtitle_sentences: int = 0
    single_subtitle_sentences: int = 0
    shortfall: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


class InsufficientSingles(UserWarning):
    """Fewer single-subtitle sentences than multi-subtitle ones were available."""

    def __init__(self, shortfall: int):
        self.shortfall = shortfall
        super().__init__(f"{shortfall} single-subtitle sentences short of a balanced corpus")


def is_conformant(s: SegmentedSentence, limit: int) -> bool:
    return all(line_length(line) <= limit for line in split_lines(s))


def filter_conformant(c: Corpus, limit: int = 42) -> tuple[Corpus, PipelineStats]:
    kept = [s for s in c.sentences if is_conformant(s, limit)]
    stats = PipelineStats(input_sentences=len(c), kept_sentences=len(kept))
    stats.single_subtitle_sentences = sum(1 for s in kept if n_breaks(s) == 1)
    stats.multi_subtitle_sentences = sum(1 for s in kept if n_breaks(s) >= 2)
    return c.with_sentences(kept), stats


def substitute_sentence(s: SegmentedSentence, p: float,
                        rng: np.random.Generator) -> tuple[SegmentedSentence, int, int]:
    """Replace non-final ``<eob>`` by ``<eol>`` with probability ``p``, left to right.

    A replacement is skipped, without consuming a draw, when the previous
    break is already ``<eol>`` or the next one is an ``<eol>``, so no two
    successive breaks are both ``<eol>``.  Returns the new sentence, the
    number of draws made and the number of substitutions.
    """
    tokens = list(s.tokens)
    positions = [i for i, t in enumerate(tokens) if t in (EOL, EOB)]
    last = max((i for i in positions if tokens[i] == EOB), default=None)
    prev_kind = None
    draws = subs = 0
    for k, i in enumerate(positions):
        tok = tokens[i]
        next_kind = tokens[positions[k + 1]] if k + 1 < len(positions) else None
        if tok == EOB and i != last and prev_kind != EOL and next_kind != EOL:
            draws += 1
            if rng.random() < p:
                tokens[i] = EOL
                subs += 1
        prev_kind = tokens[i]
    return SegmentedSentence(tuple(tokens)), draws, subs


def eob_to_eol_substitution(c: Corpus, p: float = 0.25, seed: int = 0) -> tuple[Corpus, PipelineStats]:
    """Substitute breaks sentence by sentence; sentence ``i`` draws from stream ``(seed, i)``."""
    out = []
    stats = PipelineStats(input_sentences=len(c), kept_sentences=len(c))
    for i, s in enumerate(c.sentences):
        new, draws, subs = substitute_sentence(s, p, sentence_rng(seed, i))
        out.append(new)
        stats.eligible_breaks += draws
        stats.substituted_breaks += subs
    return c.with_sentences(out), stats


def n_breaks(s: SegmentedSentence) -> int:
    return sum(1 for t in s.tokens if t in (EOL, EOB))


def plan_balance(n_multi: int, n_single: int) -> tuple[int, int, int]:
    """Number of singles to sample, output size and shortfall for a balanced corpus."""
    take = min(n_multi, n_single)
    return take, n_multi + take, n_multi - take


def balance_single_multi(c: Corpus, seed: int = 0) -> tuple[Corpus, PipelineStats]:
    """Keep every sentence with two or more breaks and as many one-break sentences.

    The one-break sentences are a uniform sample without replacement.
    Output keeps the input order.  Sentences without breaks are dropped.
    A :class:`InsufficientSingles` warning is issued when there are not
    enough one-break sentences; all of them are then included.
    """
    multi = [i for i, s in enumerate(c.sentences) if n_breaks(s) >= 2]
    single = [i for i, s in enumerate(c.sentences) if n_breaks(s) == 1]
    take, size, shortfall = plan_balance(len(multi), len(single))
    rng = np.random.Generator(np.random.PCG64(seed))
    chosen = rng.choice(len(single), size=take, replace=False) if take else np.array([], dtype=int)
    keep = sorted(multi + [single[k] for k in chosen])
    assert len(keep) == size
    stats = PipelineStats(
        input_sentences=len(c),
        kept_sentences=size,
        multi_subtitle_sentences=len(multi),
        single_subtitle_sentences=len(single),
        shortfall=shortfall,
    )
    if shortfall:
        warnings.warn(InsufficientSingles(shortfall), stacklevel=2)
    return c.with_sentences([c.sentences[i] for i in keep]), stats


def make_unsegmented(c: Corpus) -> Corpus:
    return c.with_sentences([SegmentedSentence(tuple(strip_breaks(s))) for s in c.sentences])
