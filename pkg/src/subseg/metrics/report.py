"""Full evaluation of a segmented hypothesis corpus against references."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from ..corpus import EOB, EOL, SegmentedSentence, serialize_segmented, strip_breaks
from ..errors import LengthMismatch
from .bleu import BleuScore, bleu
from .segmentation import (BreakCounts, PatternStats, ZeroReferenceBreaks, break_coverage,
                           break_pattern_stats, count_breaks, cpl_conformity)
from .sigma import sigma


@dataclass(frozen=True)
class EvaluationReport:
    bleu: BleuScore
    sigma: float
    cpl_conformity: float
    eol_coverage: float | None
    eob_coverage: float | None
    counts: BreakCounts
    pattern_stats: PatternStats | None = None

    def as_dict(self) -> dict:
        c = self.counts
        return {
            "bleu": self.bleu.score,
            "sigma": self.sigma,
            "cpl": self.cpl_conformity,
            "eol_coverage": self.eol_coverage,
            "eob_coverage": self.eob_coverage,
            "pattern_stats": self.pattern_stats.as_dict() if self.pattern_stats else None,
            "counts": {"eol_pred": c.eol_pred, "eol_ref": c.eol_ref,
                       "eob_pred": c.eob_pred, "eob_ref": c.eob_ref},
        }

    def format_text(self) -> str:
        def pct(x):
            return "n/a" if x is None else f"{x:+.1f}%"
        return (f"BLEU {self.bleu.score:.2f}  Sigma {self.sigma:.2f}  "
                f"CPL {self.cpl_conformity:.1f}%  EOL {pct(self.eol_coverage)}  "
                f"EOB {pct(self.eob_coverage)}")


def _coverage(counts, kind):
    try:
        return break_coverage(counts, kind)
    except ZeroReferenceBreaks:
        return None


def evaluate(hyps: Sequence[SegmentedSentence], refs: Sequence[SegmentedSentence],
             limit: int = 42, function_words: Iterable[str] | None = None) -> EvaluationReport:
    """BLEU on break-free text plus Sigma, CPL and break coverage.

    Coverage of a kind absent from the references is reported as ``None``.
    """
    if len(hyps) != len(refs):
        raise LengthMismatch(f"{len(hyps)} hypotheses vs {len(refs)} references")
    text_bleu = bleu([" ".join(strip_breaks(h)) for h in hyps],
                     [" ".join(strip_breaks(r)) for r in refs])
    sig = sigma([serialize_segmented(h) for h in hyps], [serialize_segmented(r) for r in refs])
    counts = count_breaks(hyps, refs)
    patterns = break_pattern_stats(hyps, function_words) if function_words is not None else None
    return EvaluationReport(
        bleu=text_bleu,
        sigma=sig,
        cpl_conformity=cpl_conformity(hyps, limit),
        eol_coverage=_coverage(counts, EOL),
        eob_coverage=_coverage(counts, EOB),
        counts=counts,
        pattern_stats=patterns,
    )
