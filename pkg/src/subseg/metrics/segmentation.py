"""Length conformity, break coverage, break patterns and placement scores."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

from ..corpus import BREAKS, EOB, EOL, SegmentedSentence, line_length, split_lines
from ..errors import EmptyCorpus, LengthMismatch, SubsegError
from ..kernels import edit_alignment

PUNCTUATION = frozenset('.,!?:;…"\')]}»—')


class ZeroReferenceBreaks(SubsegError):
    pass


def cpl_conformity(sents: Sequence[SegmentedSentence], limit: int = 42) -> float:
    """Percentage of subtitle lines with at most ``limit`` characters."""
    total = ok = 0
    for s in sents:
        for line in split_lines(s):
            total += 1
            ok += line_length(line) <= limit
    if total == 0:
        raise EmptyCorpus("no subtitle lines to measure")
    return 100.0 * ok / total


@dataclass(frozen=True)
class BreakCounts:
    eol_pred: int
    eol_ref: int
    eob_pred: int
    eob_ref: int

    def pred(self, kind: str) -> int:
        return self.eol_pred if str(kind) == EOL else self.eob_pred

    def ref(self, kind: str) -> int:
        return self.eol_ref if str(kind) == EOL else self.eob_ref


def count_breaks(hyps: Iterable[SegmentedSentence], refs: Iterable[SegmentedSentence]) -> BreakCounts:
    eol_p = eob_p = eol_r = eob_r = 0
    for s in hyps:
        eol_p += s.count(EOL)
        eob_p += s.count(EOB)
    for s in refs:
        eol_r += s.count(EOL)
        eob_r += s.count(EOB)
    return BreakCounts(eol_p, eol_r, eob_p, eob_r)


def break_coverage(counts: BreakCounts, kind: str) -> float:
    """Signed over/under-generation of a break kind, in percent.

    Negative when fewer breaks are predicted than the references contain.
    Computed as ``100 * (pred - ref) / ref``, which equals
    ``pred / ref * 100 - 100`` but rounds once, so e.g. 1004 vs 1000 gives
    exactly 0.4.
    """
    ref = counts.ref(kind)
    if ref <= 0:
        raise ZeroReferenceBreaks(f"references contain no {kind} breaks")
    return 100.0 * (counts.pred(kind) - ref) / ref


# --------------------------------------------------------------------------
# break patterns


@dataclass(frozen=True)
class KindPatterns:
    breaks: int
    after_punctuation: float
    before_function_word: float


@dataclass(frozen=True)
class PatternStats:
    eol: KindPatterns | None
    eob: KindPatterns | None

    def as_dict(self) -> dict:
        def one(k: KindPatterns | None):
            if k is None:
                return None
            return {"breaks": k.breaks, "after_punctuation": k.after_punctuation,
                    "before_function_word": k.before_function_word}
        return {"eol": one(self.eol), "eob": one(self.eob)}


def load_function_words(language: str) -> frozenset[str]:
    """Bundled function-word list (prepositions and conjunctions) for ``language``."""
    try:
        text = (resources.files("subseg") / "data" / "function_words" / f"{language}.txt").read_text(
            encoding="utf-8")
    except FileNotFoundError:
        raise SubsegError(f"no function-word list bundled for {language!r}") from None
    return frozenset(w.strip().lower() for w in text.splitlines()
                     if w.strip() and not w.startswith("#"))


def break_pattern_stats(sents: Sequence[SegmentedSentence],
                        function_words: Iterable[str]) -> PatternStats:
    """How often each break kind follows punctuation or precedes a function word.

    Percentages are over all breaks of the kind; a sentence-final break
    has no following word and never counts as preceding a function word.
    Kinds that never occur are reported as ``None``.
    """
    if not sents:
        raise EmptyCorpus("no sentences")
    fw = frozenset(w.lower() for w in function_words)
    tallies = {EOL: [0, 0, 0], EOB: [0, 0, 0]}
    for s in sents:
        toks = s.tokens
        for i, tok in enumerate(toks):
            if tok not in BREAKS:
                continue
            t = tallies[tok]
            t[0] += 1
            prev = next((toks[k] for k in range(i - 1, -1, -1) if toks[k] not in BREAKS), None)
            if prev and prev[-1] in PUNCTUATION:
                t[1] += 1
            nxt = next((toks[k] for k in range(i + 1, len(toks)) if toks[k] not in BREAKS), None)
            if nxt is not None and nxt.lower() in fw:
                t[2] += 1

    def make(t):
        if t[0] == 0:
            return None
        return KindPatterns(t[0], 100.0 * t[1] / t[0], 100.0 * t[2] / t[0])

    return PatternStats(eol=make(tallies[EOL]), eob=make(tallies[EOB]))


# --------------------------------------------------------------------------
# placement


def _break_positions(s: SegmentedSentence) -> tuple[list[str], list[tuple[int, str]]]:
    words: list[str] = []
    breaks = []
    for tok in s.tokens:
        if tok in BREAKS:
            breaks.append((len(words) - 1, tok))
        else:
            words.append(tok)
    return words, breaks


def projected_breaks(hyp: SegmentedSentence, ref: SegmentedSentence) -> list[tuple[int, str]]:
    """Hypothesis breaks expressed as positions in reference word coordinates."""
    hyp_words, hyp_breaks = _break_positions(hyp)
    ref_words, _ = _break_positions(ref)
    vocab: dict[str, int] = {}
    hid = [vocab.setdefault(w, len(vocab)) for w in hyp_words]
    rid = [vocab.setdefault(w, len(vocab)) for w in ref_words]
    align = edit_alignment(hid, rid)
    anchor, last = [], -1
    for j in align:
        if j >= 0:
            last = j
        anchor.append(last)
    return [(anchor[p] if p >= 0 else -1, kind) for p, kind in hyp_breaks]


def placement_f1(hyps: Sequence[SegmentedSentence], refs: Sequence[SegmentedSentence],
                 kind: str = EOB, include_final: bool = False) -> float:
    """F1 (percent) of break placement for one break kind, pooled over the corpus.

    Hypothesis breaks are mapped to reference word positions through an
    edit alignment, so the score is defined when the text differs.  The
    break after the last reference word is skipped unless
    ``include_final`` is set, since every well-formed sentence has it.
    """
    if len(hyps) != len(refs):
        raise LengthMismatch(f"{len(hyps)} hypotheses vs {len(refs)} references")
    kind = str(kind)
    tp = n_hyp = n_ref = 0
    for h, r in zip(hyps, refs):
        ref_words, ref_breaks = _break_positions(r)
        last = len(ref_words) - 1
        ref_set = [p for p, k in ref_breaks if k == kind and (include_final or p != last)]
        hyp_set = [p for p, k in projected_breaks(h, r) if k == kind and (include_final or p != last)]
        remaining = list(ref_set)
        for p in hyp_set:
            if p in remaining:
                remaining.remove(p)
                tp += 1
        n_hyp += len(hyp_set)
        n_ref += len(ref_set)
    if n_hyp + n_ref == 0:
        return 100.0
    return 100.0 * 2 * tp / (n_hyp + n_ref)


def exact_placement(hyps: Sequence[SegmentedSentence], refs: Sequence[SegmentedSentence]) -> float:
    """Percentage of sentences whose breaks (position and kind) all match the reference."""
    if len(hyps) != len(refs):
        raise LengthMismatch(f"{len(hyps)} hypotheses vs {len(refs)} references")
    if not hyps:
        raise EmptyCorpus("no sentences")
    hits = sum(projected_breaks(h, r) == _break_positions(r)[1] for h, r in zip(hyps, refs))
    return 100.0 * hits / len(hyps)
