"""Paired bootstrap resampling test for corpus BLEU."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import LengthMismatch, SubsegError
from .bleu import BleuScore, corpus_stats, score_from_stats
from .tokenizer import tokenize_13a


@dataclass(frozen=True)
class BootstrapResult:
    bleu_a: BleuScore
    bleu_b: BleuScore
    samples: int
    a_better: int
    b_better: int
    ties: int

    @property
    def win_rate(self) -> float:
        """Fraction of resamples in which system A scores strictly higher."""
        return self.a_better / self.samples

    @property
    def p_value(self) -> float:
        """Two-sided p-value; ties count against both directions."""
        a_not_better = (self.b_better + self.ties) / self.samples
        b_not_better = (self.a_better + self.ties) / self.samples
        return min(1.0, 2.0 * min(a_not_better, b_not_better))

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha


def paired_bootstrap(hyp_a: Sequence[str], hyp_b: Sequence[str], refs: Sequence[str],
                     samples: int = 1000, seed: int = 0) -> BootstrapResult:
    if not (len(hyp_a) == len(hyp_b) == len(refs)):
        raise LengthMismatch(
            f"system A has {len(hyp_a)}, system B {len(hyp_b)}, references {len(refs)} lines")
    if samples < 100:
        raise SubsegError(f"need at least 100 resamples, got {samples}")
    ref_tok = [tokenize_13a(r) for r in refs]
    stats_a = corpus_stats([tokenize_13a(h) for h in hyp_a], ref_tok)
    stats_b = corpus_stats([tokenize_13a(h) for h in hyp_b], ref_tok)

    rng = np.random.Generator(np.random.PCG64(seed))
    n = len(refs)
    a_better = b_better = ties = 0
    for _ in range(samples):
        idx = rng.integers(0, n, size=n)
        sa = score_from_stats(stats_a[idx].sum(axis=0)).score
        sb = score_from_stats(stats_b[idx].sum(axis=0)).score
        if sa > sb:
            a_better += 1
        elif sb > sa:
            b_better += 1
        else:
            ties += 1
    return BootstrapResult(score_from_stats(stats_a.sum(axis=0)),
                           score_from_stats(stats_b.sum(axis=0)),
                           samples, a_better, b_better, ties)
