"""Evaluation metrics: BLEU, Sigma, CPL conformity, break coverage and more."""

from .bleu import BleuScore, bleu, bleu_tokens, corpus_stats, score_from_stats, sentence_stats
from .report import EvaluationReport, evaluate
from .segmentation import (PUNCTUATION, BreakCounts, KindPatterns, PatternStats,
                           ZeroReferenceBreaks, break_coverage, break_pattern_stats,
                           count_breaks, cpl_conformity, exact_placement, load_function_words,
                           placement_f1, projected_breaks)
from .sigma import ZeroUpperBound, project_breaks, sigma, sigma_details
from .significance import BootstrapResult, paired_bootstrap
from .tokenizer import tokenize_13a

__all__ = [
    "BleuScore", "BootstrapResult", "BreakCounts", "EvaluationReport", "KindPatterns",
    "PUNCTUATION", "PatternStats", "ZeroReferenceBreaks", "ZeroUpperBound", "bleu",
    "bleu_tokens", "break_coverage", "break_pattern_stats", "corpus_stats", "count_breaks",
    "cpl_conformity", "evaluate", "exact_placement", "load_function_words", "paired_bootstrap",
    "placement_f1", "project_breaks", "projected_breaks", "score_from_stats", "sentence_stats",
    "sigma", "sigma_details", "tokenize_13a",
]
