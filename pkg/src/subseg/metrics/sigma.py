"""Sigma: break-inclusive BLEU relative to the best achievable segmentation.

The numerator is BLEU between hypotheses and references with breaks kept
as atomic tokens.  The denominator is the same BLEU for an oracle
hypothesis: the hypothesis words with the reference breaks projected
onto them through a minimum-edit-distance alignment.  A reference break
after reference token ``i`` lands after the hypothesis token aligned to
``i``; if ``i`` was deleted, after the nearest preceding aligned token,
or at the very start when there is none.
"""

from __future__ import annotations

from typing import Sequence

from ..corpus import BREAKS, SegmentedSentence, serialize_segmented
from ..errors import LengthMismatch, SubsegError
from ..kernels import edit_alignment
from .bleu import BleuScore, bleu_tokens
from .tokenizer import tokenize_13a


class ZeroUpperBound(SubsegError):
    """The oracle segmentation scores BLEU 0, so the ratio is undefined."""


def _tokens(s: SegmentedSentence | str) -> list[str]:
    text = s if isinstance(s, str) else serialize_segmented(s)
    return tokenize_13a(text)


def _split(tokens: Sequence[str]) -> tuple[list[str], list[tuple[int, str]]]:
    """Words and ``(index of preceding word, kind)`` for every break."""
    words: list[str] = []
    breaks: list[tuple[int, str]] = []
    for tok in tokens:
        if tok in BREAKS:
            breaks.append((len(words) - 1, tok))
        else:
            words.append(tok)
    return words, breaks


def _ids(a: Sequence[str], b: Sequence[str]) -> tuple[list[int], list[int]]:
    vocab: dict[str, int] = {}
    ia = [vocab.setdefault(t, len(vocab)) for t in a]
    ib = [vocab.setdefault(t, len(vocab)) for t in b]
    return ia, ib


def project_breaks(hyp_tokens: Sequence[str], ref_tokens: Sequence[str]) -> list[str]:
    """Oracle hypothesis: hypothesis words carrying the reference breaks."""
    hyp_words, _ = _split(hyp_tokens)
    ref_words, ref_breaks = _split(ref_tokens)
    ref_ids, hyp_ids = _ids(ref_words, hyp_words)
    align = edit_alignment(ref_ids, hyp_ids)

    # nearest aligned hypothesis position at or before each reference position
    anchor = []
    last = -1
    for j in align:
        if j >= 0:
            last = j
        anchor.append(last)

    after: dict[int, list[str]] = {}
    for ref_pos, kind in ref_breaks:
        pos = anchor[ref_pos] if ref_pos >= 0 else -1
        after.setdefault(pos, []).append(kind)

    out = list(after.get(-1, []))
    for j, w in enumerate(hyp_words):
        out.append(w)
        out.extend(after.get(j, []))
    return out


def sigma_details(hyps: Sequence[SegmentedSentence | str],
                  refs: Sequence[SegmentedSentence | str]) -> tuple[float, BleuScore, BleuScore]:
    """Sigma together with the achieved and the upper-bound break-inclusive BLEU."""
    if len(hyps) != len(refs):
        raise LengthMismatch(f"{len(hyps)} hypotheses vs {len(refs)} references")
    hyp_tok = [_tokens(h) for h in hyps]
    ref_tok = [_tokens(r) for r in refs]
    achieved = bleu_tokens(hyp_tok, ref_tok)
    oracle = [project_breaks(h, r) for h, r in zip(hyp_tok, ref_tok)]
    upper = bleu_tokens(oracle, ref_tok)
    if upper.score == 0.0:
        raise ZeroUpperBound("oracle segmentation has BLEU 0")
    value = max(0.0, 100.0 * achieved.score / upper.score)
    return value, achieved, upper


def sigma(hyps: Sequence[SegmentedSentence | str],
          refs: Sequence[SegmentedSentence | str]) -> float:
    return sigma_details(hyps, refs)[0]
