"""Checkpoint files and checkpoint averaging.

A checkpoint file is a ``torch.save`` dictionary holding only plain
Python values and tensors, so it loads with ``weights_only=True``::

    {"format": "subseg-checkpoint", "version": 1, "config": {...},
     "step": int, "val_loss": float | None, "params": {name: tensor},
     "meta": {...}}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import torch

from ..errors import SubsegError
from .config import ModelConfig
from .model import Segmenter

FORMAT = "subseg-checkpoint"
VERSION = 1
AVERAGE_COUNT = 7


class ConfigMismatch(SubsegError):
    pass


class WrongCount(SubsegError):
    pass


class CheckpointFormatError(SubsegError):
    pass


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, torch.Tensor]
    step: int = 0
    val_loss: float | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: Segmenter, step: int = 0, val_loss: float | None = None,
                   meta: dict | None = None) -> "Checkpoint":
        params = {k: v.detach().clone() for k, v in model.state_dict().items()}
        return cls(model.cfg, params, step, val_loss, dict(meta or {}))

    def build_model(self, dtype=torch.float32) -> Segmenter:
        model = Segmenter(self.config).to(dtype)
        self.load_into(model)
        model.eval()
        return model

    def load_into(self, model: Segmenter) -> None:
        if model.cfg != self.config:
            raise ConfigMismatch("checkpoint config differs from the model config")
        model.load_state_dict(self.params)


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    torch.save({
        "format": FORMAT,
        "version": VERSION,
        "config": ckpt.config.to_dict(),
        "step": int(ckpt.step),
        "val_loss": None if ckpt.val_loss is None else float(ckpt.val_loss),
        "params": ckpt.params,
        "meta": ckpt.meta,
    }, str(path))


def load_checkpoint(path: str | Path) -> Checkpoint:
    blob = torch.load(str(path), map_location="cpu", weights_only=True)
    if not isinstance(blob, dict) or blob.get("format") != FORMAT:
        raise CheckpointFormatError(f"{path} is not a subseg checkpoint")
    if blob.get("version") != VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {blob.get('version')}")
    return Checkpoint(ModelConfig.from_dict(blob["config"]), blob["params"], blob["step"],
                      blob["val_loss"], blob.get("meta", {}))


def average_checkpoints(ckpts: Sequence[Checkpoint], allow_any_count: bool = False) -> dict[str, torch.Tensor]:
    """Elementwise mean of every named tensor.

    Exactly seven checkpoints (the best one and three on either side) are
    expected unless ``allow_any_count`` is set.
    """
    if not ckpts:
        raise WrongCount("no checkpoints to average")
    if len(ckpts) != AVERAGE_COUNT and not allow_any_count:
        raise WrongCount(f"expected {AVERAGE_COUNT} checkpoints, got {len(ckpts)}")
    ref = ckpts[0]
    for c in ckpts[1:]:
        if c.config != ref.config or c.params.keys() != ref.params.keys():
            raise ConfigMismatch("checkpoints come from different model configurations")
    out = {}
    for name, first in ref.params.items():
        if not first.is_floating_point():
            out[name] = first.clone()
            continue
        acc = first.double().clone()
        for c in ckpts[1:]:
            acc += c.params[name].double()
        out[name] = (acc / len(ckpts)).to(first.dtype)
    return out


def select_around_best(ckpts: Sequence[Checkpoint], side: int = 3) -> list[Checkpoint]:
    """The best checkpoint by validation loss with ``side`` neighbours each way (by step)."""
    ordered = sorted(ckpts, key=lambda c: c.step)
    scored = [i for i, c in enumerate(ordered) if c.val_loss is not None]
    if not scored:
        raise SubsegError("no checkpoint has a validation loss")
    best = min(scored, key=lambda i: ordered[i].val_loss)
    lo = max(0, min(best - side, len(ordered) - (2 * side + 1)))
    return ordered[lo:lo + 2 * side + 1]
