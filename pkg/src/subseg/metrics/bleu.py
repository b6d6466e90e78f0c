"""Corpus-level BLEU-4 with single references and exponential smoothing."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import EmptyCorpus, LengthMismatch, SubsegError
from .tokenizer import tokenize_13a

MAX_ORDER = 4


@dataclass(frozen=True)
class BleuScore:
    score: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    matches: tuple[int, ...] = ()
    totals: tuple[int, ...] = ()

    def __float__(self) -> float:
        return self.score

    def __str__(self) -> str:
        prec = "/".join(f"{100 * p:.1f}" for p in self.precisions)
        return (f"BLEU = {self.score:.2f} {prec} (BP = {self.brevity_penalty:.3f} "
                f"hyp_len = {self.hyp_len} ref_len = {self.ref_len})")


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def sentence_stats(hyp: Sequence[str], ref: Sequence[str]) -> list[int]:
    """Sufficient statistics of one pair: matches[1..4], totals[1..4], hyp_len, ref_len."""
    matches, totals = [], []
    for n in range(1, MAX_ORDER + 1):
        h = _ngrams(hyp, n)
        r = _ngrams(ref, n)
        matches.append(sum(min(c, r[g]) for g, c in h.items()))
        totals.append(max(len(hyp) - n + 1, 0))
    return matches + totals + [len(hyp), len(ref)]


def score_from_stats(stats: Sequence[int], smoothing: str = "exp") -> BleuScore:
    matches = [int(x) for x in stats[:MAX_ORDER]]
    totals = [int(x) for x in stats[MAX_ORDER:2 * MAX_ORDER]]
    hyp_len, ref_len = int(stats[2 * MAX_ORDER]), int(stats[2 * MAX_ORDER + 1])

    precisions = [0.0] * MAX_ORDER
    logs = []
    smooth = 1.0
    for n in range(MAX_ORDER):
        if totals[n] == 0:
            continue
        if matches[n] == 0:
            if smoothing == "exp":
                smooth *= 2
                precisions[n] = 1.0 / (smooth * totals[n])
            elif smoothing == "none":
                precisions[n] = 0.0
            else:
                raise SubsegError(f"unknown smoothing {smoothing!r}")
        else:
            precisions[n] = matches[n] / totals[n]
        logs.append(math.log(precisions[n]) if precisions[n] > 0 else -math.inf)

    if hyp_len > ref_len:
        bp = 1.0
    elif hyp_len == 0:
        bp = 0.0
    else:
        bp = math.exp(1.0 - ref_len / hyp_len)

    if not logs or bp == 0.0 or -math.inf in logs:
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(logs) / len(logs))
    return BleuScore(score, tuple(precisions), bp, hyp_len, ref_len,
                     tuple(matches), tuple(totals))


def _check_pair(hyps, refs):
    if len(hyps) != len(refs):
        raise LengthMismatch(f"{len(hyps)} hypotheses vs {len(refs)} references")
    if not hyps:
        raise EmptyCorpus("BLEU needs at least one sentence")


def corpus_stats(hyp_tokens: Sequence[Sequence[str]],
                 ref_tokens: Sequence[Sequence[str]]) -> np.ndarray:
    """Per-sentence sufficient statistics as an ``(n, 10)`` integer array."""
    _check_pair(hyp_tokens, ref_tokens)
    return np.array([sentence_stats(h, r) for h, r in zip(hyp_tokens, ref_tokens)],
                    dtype=np.int64)


def bleu_tokens(hyp_tokens: Sequence[Sequence[str]], ref_tokens: Sequence[Sequence[str]],
                smoothing: str = "exp") -> BleuScore:
    """BLEU over already tokenized sentences."""
    stats = corpus_stats(hyp_tokens, ref_tokens)
    return score_from_stats(stats.sum(axis=0), smoothing)


def bleu(hyps: Sequence[str], refs: Sequence[str], smoothing: str = "exp") -> BleuScore:
    """Corpus BLEU of detokenized strings, tokenized with 13a, case-sensitive."""
    _check_pair(hyps, refs)
    return bleu_tokens([tokenize_13a(h) for h in hyps], [tokenize_13a(r) for r in refs],
                       smoothing)
