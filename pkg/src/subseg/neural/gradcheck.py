"""Finite-difference verification of the analytic gradients."""

from __future__ import annotations

import numpy as np
import torch

from ..corpus import SegmentedSentence
from .config import ModelConfig
from .model import Segmenter
from .train import collate, compute_loss, make_example
from .vocab import build_char_vocab

RELATIVE_FLOOR = 1e-6


def tiny_config(mode: str, vocab) -> ModelConfig:
    layers = dict(textual=(1, 0), multimodal=(1, 1), speech_only=(0, 1))[mode]
    return ModelConfig(vocab=tuple(vocab), mode=mode, d_model=8, n_heads=2, ffn_dim=16,
                       text_enc_layers=layers[0], speech_enc_layers=layers[1], dec_layers=1,
                       feature_dims=5, speech_downsample=4, dropout=0.0, max_positions=256)


def _tiny_batch(cfg: ModelConfig, rng: np.random.Generator):
    vocab = cfg.vocabulary()
    sentences = [SegmentedSentence(("ab", "<eol>", "ba", "<eob>")),
                 SegmentedSentence(("b", "ab", "<eob>"))]
    examples = []
    for s in sentences:
        feats = rng.normal(size=(24, cfg.feature_dims)) if cfg.has_speech else None
        examples.append(make_example(vocab, cfg, s, features=feats, language="xx"))
    return collate(examples, vocab.pad, dtype=torch.float64)


def gradient_check(mode: str = "multimodal", seed: int = 0, n_params: int = 256,
                   step: float = 1e-5, ctc_weight: float = 0.5, label_smoothing: float = 0.1) -> float:
    """Maximum relative error between autograd and central differences.

    The error for one coordinate is ``|a - n| / max(|a|, |n|, 1e-6)``;
    the floor keeps coordinates whose gradient is numerically zero from
    dominating.  Runs in float64 with dropout disabled.
    """
    vocab = build_char_vocab(["ab ba"], languages=["xx"]).tokens
    cfg = tiny_config(mode, vocab)
    torch.manual_seed(seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    model = Segmenter(cfg).double()
    # non-trivial norms and biases so that every parameter is exercised
    with torch.no_grad():
        for name, p in model.named_parameters():
            if "norm" in name or name.endswith(".bias"):
                p.add_(torch.as_tensor(rng.normal(scale=0.1, size=p.shape)))
    model.eval()
    batch = _tiny_batch(cfg, rng)

    def loss_fn():
        return compute_loss(model, batch, label_smoothing, ctc_weight)[0]

    model.zero_grad()
    loss_fn().backward()
    params = [(n, p) for n, p in model.named_parameters()]
    grads = {n: p.grad.detach().clone() for n, p in params}
    sizes = np.array([p.numel() for _, p in params])
    total = int(sizes.sum())
    picks = rng.choice(total, size=min(n_params, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    worst = 0.0
    with torch.no_grad():
        for flat in picks:
            k = int(np.searchsorted(offsets, flat, side="right") - 1)
            name, p = params[k]
            idx = int(flat - offsets[k])
            view = p.view(-1)
            orig = view[idx].item()
            view[idx] = orig + step
            up = loss_fn().item()
            view[idx] = orig - step
            down = loss_fn().item()
            view[idx] = orig
            numeric = (up - down) / (2 * step)
            analytic = grads[name].view(-1)[idx].item()
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), RELATIVE_FLOOR)
            worst = max(worst, err)
    return worst
