"""Connectionist temporal classification loss (forward algorithm, log space)."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import torch

from ..errors import SubsegError
from ..kernels import ctc_forward

NEG = -1e30


class TargetTooLong(SubsegError):
    pass


def min_frames(target: Sequence[int]) -> int:
    """Frames needed to emit ``target``: one per label plus a blank between repeats."""
    target = list(target)
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def ctc_loss(log_probs, target: Sequence[int], blank: int) -> float:
    """Negative log marginal probability of ``target`` over all CTC alignments.

    ``log_probs`` is frames x symbols (rows are log-softmax outputs,
    including the blank symbol).
    """
    lp = np.asarray(log_probs, dtype=np.float64)
    tgt = np.asarray(list(target), dtype=np.int64)
    if lp.ndim != 2 or lp.shape[0] < 1:
        raise SubsegError(f"log_probs must be frames x symbols, got shape {lp.shape}")
    need = min_frames(tgt)
    if lp.shape[0] < need:
        raise TargetTooLong(f"target needs {need} frames, only {lp.shape[0]} available")
    return float(ctc_forward(lp, tgt, blank))


def ctc_loss_batch(log_probs: torch.Tensor, input_lengths: torch.Tensor, targets: torch.Tensor,
                   target_lengths: torch.Tensor, blank: int) -> torch.Tensor:
    """Differentiable per-utterance CTC negative log-likelihoods, shape ``(B,)``.

    ``log_probs`` is ``(B, T, V)``; ``targets`` is ``(B, L)`` padded with
    any value beyond ``target_lengths``.  Unreachable alignments carry a
    large negative constant instead of ``-inf`` so gradients stay finite;
    infeasible utterances come out around ``1e30`` and must be masked by
    the caller.
    """
    B, T, V = log_probs.shape
    L = targets.shape[1]
    S = 2 * L + 1
    ext = torch.full((B, S), blank, dtype=torch.long, device=log_probs.device)
    if L:
        ext[:, 1::2] = targets
    s_idx = torch.arange(S, device=log_probs.device)
    # positions past this utterance's extended target behave as blanks
    valid = s_idx[None, :] < (2 * target_lengths + 1)[:, None]
    ext = torch.where(valid, ext, torch.full_like(ext, blank))
    skip = torch.zeros(B, S, dtype=torch.bool, device=log_probs.device)
    if S > 2:
        skip[:, 2:] = (ext[:, 2:] != blank) & (ext[:, 2:] != ext[:, :-2])

    lp = log_probs.gather(2, ext.unsqueeze(1).expand(B, T, S))  # (B, T, S)
    neg = lp.new_full((B, 1), NEG)
    first = lp[:, 0, :min(2, S)]
    alpha = torch.cat([first, lp.new_full((B, S - first.shape[1]), NEG)], dim=1)
    start_mask = torch.zeros(S, dtype=torch.bool, device=log_probs.device)
    start_mask[:2] = True
    alpha = torch.where(start_mask[None, :] & valid, alpha, torch.full_like(alpha, NEG))
    for t in range(1, T):
        a1 = alpha
        a2 = torch.cat([neg, alpha[:, :-1]], dim=1)
        a3 = torch.cat([neg, neg, alpha[:, :-2]], dim=1)[:, :S] if S > 2 else torch.full_like(alpha, NEG)
        a3 = torch.where(skip, a3, torch.full_like(a3, NEG))
        new = torch.logsumexp(torch.stack([a1, a2, a3]), dim=0) + lp[:, t]
        active = (t < input_lengths)[:, None]
        alpha = torch.where(active, new, alpha)
    end = 2 * target_lengths  # index of the final blank
    last = alpha.gather(1, end[:, None]).squeeze(1)
    prev = alpha.gather(1, (end - 1).clamp(min=0)[:, None]).squeeze(1)
    prev = torch.where(target_lengths > 0, prev, torch.full_like(prev, NEG))
    return -torch.logaddexp(last, prev)
