"""Training: batches, losses, the inverse square-root schedule and Adam steps."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..corpus import FeatureMatrix, SegmentedSentence, feature_array
from ..errors import SubsegError
from .config import ModelConfig, TrainConfig
from .ctc import ctc_loss_batch, min_frames
from .model import Segmenter
from .vocab import Vocabulary


class NaNLoss(SubsegError):
    def __init__(self, step: int, record: dict):
        self.step = step
        self.record = record
        super().__init__(f"non-finite loss at step {step}: {record}")


def lr_schedule(step: int, base_lr: float = 1e-3, warmup_steps: int = 4000) -> float:
    """Linear warmup to ``base_lr``, then decay with the inverse square root of the step."""
    if step < 1:
        raise SubsegError(f"step must be >= 1, got {step}")
    if step <= warmup_steps:
        return base_lr * step / warmup_steps
    return base_lr * math.sqrt(warmup_steps / step)


@dataclass
class Example:
    """One training pair in id space."""

    target: list[int]                 # full decoder sequence: bos [lang] ... eos
    src: list[int] | None = None      # break-free text ids
    speech: np.ndarray | None = None  # frames x dims
    transcript: list[int] | None = None  # CTC target
    language: str = "und"


def make_example(vocab: Vocabulary, cfg: ModelConfig, target: SegmentedSentence,
                 source_words: Sequence[str] | None = None,
                 features: FeatureMatrix | np.ndarray | None = None,
                 transcript_words: Sequence[str] | None = None,
                 language: str | None = None) -> Example:
    prefix = [vocab.bos]
    if cfg.has_speech:
        if language is None:
            raise SubsegError(f"{cfg.mode} targets need a language token")
        prefix.append(vocab.lang_id(language))
    tgt = prefix + vocab.encode_segmented(target) + [vocab.eos]
    src = vocab.encode_words(source_words if source_words is not None else target.words) \
        if cfg.has_text else None
    speech = None
    transcript = None
    if cfg.has_speech:
        if features is None:
            raise SubsegError(f"{cfg.mode} model needs speech features")
        speech = np.asarray(feature_array(features), dtype=np.float32)
        words = transcript_words if transcript_words is not None else target.words
        transcript = vocab.encode_words(words)
    return Example(tgt, src, speech, transcript, language or "und")


@dataclass
class Batch:
    tgt_in: torch.Tensor
    tgt_out: torch.Tensor
    src: torch.Tensor | None = None
    speech: torch.Tensor | None = None
    speech_lengths: torch.Tensor | None = None
    transcript: torch.Tensor | None = None
    transcript_lengths: torch.Tensor | None = None

    @property
    def size(self) -> int:
        return self.tgt_in.shape[0]


def _pad(seqs, value, dtype=torch.long):
    n = max(len(s) for s in seqs)
    out = torch.full((len(seqs), n), value, dtype=dtype)
    for i, s in enumerate(seqs):
        if len(s):
            out[i, :len(s)] = torch.as_tensor(s, dtype=dtype)
    return out


def collate(examples: Sequence[Example], pad: int, dtype=torch.float32) -> Batch:
    tgt = [e.target for e in examples]
    batch = Batch(tgt_in=_pad([t[:-1] for t in tgt], pad), tgt_out=_pad([t[1:] for t in tgt], pad))
    if examples[0].src is not None:
        batch.src = _pad([e.src for e in examples], pad)
    if examples[0].speech is not None:
        lengths = [e.speech.shape[0] for e in examples]
        dims = examples[0].speech.shape[1]
        speech = torch.zeros(len(examples), max(lengths), dims, dtype=dtype)
        for i, e in enumerate(examples):
            speech[i, :lengths[i]] = torch.as_tensor(e.speech, dtype=dtype)
        batch.speech = speech
        batch.speech_lengths = torch.as_tensor(lengths, dtype=torch.long)
        batch.transcript = _pad([e.transcript for e in examples], pad)
        batch.transcript_lengths = torch.as_tensor([len(e.transcript) for e in examples])
    return batch


def label_smoothed_nll(logits: torch.Tensor, target: torch.Tensor, pad: int,
                       epsilon: float) -> tuple[torch.Tensor, torch.Tensor, int]:
    """Mean label-smoothed loss and mean NLL over non-pad target tokens."""
    lprobs = F.log_softmax(logits, dim=-1)
    V = lprobs.shape[-1]
    nll = -lprobs.gather(-1, target.unsqueeze(-1)).squeeze(-1)
    smooth = -lprobs.sum(-1)
    keep = target.ne(pad)
    n_tokens = int(keep.sum())
    eps_i = epsilon / (V - 1)
    loss = (1.0 - epsilon - eps_i) * nll + eps_i * smooth
    loss = loss.masked_fill(~keep, 0.0).sum() / n_tokens
    return loss, nll.masked_fill(~keep, 0.0).sum() / n_tokens, n_tokens


def compute_loss(model: Segmenter, batch: Batch, label_smoothing: float = 0.1,
                 ctc_weight: float = 0.5) -> tuple[torch.Tensor, dict]:
    logits, ctc_logits, ctc_lengths = model(batch.tgt_in, speech=batch.speech,
                                            speech_lengths=batch.speech_lengths, src=batch.src)
    loss, nll, n_tokens = label_smoothed_nll(logits, batch.tgt_out, model.pad_id, label_smoothing)
    record = {"ce": loss.item(), "nll": nll.item(), "tokens": n_tokens}
    if ctc_logits is not None and ctc_weight > 0:
        ctc = ctc_term(model, ctc_logits, ctc_lengths, batch)
        record["ctc_loss"] = ctc.item()
        loss = loss + ctc_weight * ctc
    record["loss"] = loss.item()
    return loss, record


def ctc_term(model: Segmenter, ctc_logits, ctc_lengths, batch: Batch) -> torch.Tensor:
    """CTC NLL summed over feasible utterances, divided by their transcript tokens."""
    blank = model.cfg.vocab.index("<blank>")
    lprobs = F.log_softmax(ctc_logits, dim=-1)
    per_utt = ctc_loss_batch(lprobs, ctc_lengths, batch.transcript, batch.transcript_lengths, blank)
    feasible = torch.as_tensor([
        int(ctc_lengths[i]) >= min_frames(batch.transcript[i, :int(batch.transcript_lengths[i])].tolist())
        for i in range(batch.size)])
    if not feasible.any():
        return per_utt.sum() * 0.0
    tokens = batch.transcript_lengths[feasible].sum().clamp(min=1)
    return per_utt[feasible].sum() / tokens


@dataclass
class TrainState:
    step: int
    optimizer: torch.optim.Optimizer
    base_lr: float
    warmup_steps: int

    @property
    def moments(self) -> dict:
        """First and second Adam moments keyed like the parameters."""
        return {k: (v.get("exp_avg"), v.get("exp_avg_sq"))
                for k, v in self.optimizer.state.items()}


class Trainer:
    """Exclusive owner of a model under training."""

    def __init__(self, model: Segmenter, cfg: TrainConfig, log_file=None):
        self.model = model
        self.cfg = cfg
        self.log_file = log_file
        self.state = TrainState(
            step=0,
            optimizer=torch.optim.Adam(model.parameters(), lr=cfg.base_lr, betas=cfg.adam_betas,
                                       eps=cfg.adam_eps, weight_decay=cfg.weight_decay),
            base_lr=cfg.base_lr,
            warmup_steps=cfg.warmup_steps,
        )

    def train_step(self, batch: Batch) -> dict:
        self.model.train()
        st = self.state
        step = st.step + 1
        lr = lr_schedule(step, st.base_lr, st.warmup_steps)
        for group in st.optimizer.param_groups:
            group["lr"] = lr
        st.optimizer.zero_grad(set_to_none=True)
        loss, record = compute_loss(self.model, batch, self.cfg.label_smoothing, self.cfg.ctc_weight)
        record.update(step=step, lr=lr)
        if not torch.isfinite(loss):
            raise NaNLoss(step, record)
        loss.backward()
        if self.cfg.clip_norm > 0:
            torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.cfg.clip_norm)
        st.optimizer.step()
        st.step = step
        if self.log_file is not None and step % max(self.cfg.log_every, 1) == 0:
            self.log_file.write(json.dumps({k: record[k] for k in ("step", "lr", "loss", "ctc_loss")
                                            if k in record}) + "\n")
            self.log_file.flush()
        return record

    @torch.no_grad()
    def validation_loss(self, batches: Iterable[Batch]) -> float:
        self.model.eval()
        total = n = 0.0
        for b in batches:
            _, rec = compute_loss(self.model, b, 0.0, 0.0)
            total += rec["nll"] * rec["tokens"]
            n += rec["tokens"]
        return total / max(n, 1)


def batches(examples: Sequence[Example], batch_size: int, seed: int, pad: int,
            dtype=torch.float32) -> Iterator[Batch]:
    """Endless shuffled mini-batches; the order depends only on ``seed``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n = len(examples)
    while True:
        order = rng.permutation(n)
        for i in range(0, n, batch_size):
            chunk = order[i:i + batch_size]
            yield collate([examples[j] for j in chunk], pad, dtype)


def round_robin_batches(by_language: dict[str, Sequence[Example]], batch_size: int, seed: int,
                        pad: int, dtype=torch.float32) -> Iterator[Batch]:
    """One mini-batch per language in turn, each followed by its own update."""
    langs = sorted(by_language)
    streams = [batches(by_language[l], batch_size, seed + k, pad, dtype) for k, l in enumerate(langs)]
    while True:
        for s in streams:
            yield next(s)


def train(trainer: Trainer, stream: Iterator[Batch], steps: int, callback=None) -> list[dict]:
    history = []
    for _ in range(steps):
        rec = trainer.train_step(next(stream))
        history.append(rec)
        if callback is not None and callback(trainer, rec):
            break
    return history
