"""Model and training configuration."""

from __future__ import annotations

import ast
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..errors import SubsegError
from .vocab import Vocabulary

MODES = ("textual", "multimodal", "speech_only")


class ConfigError(SubsegError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab: tuple[str, ...]
    mode: str = "multimodal"
    d_model: int = 64
    n_heads: int = 4
    ffn_dim: int = 128
    text_enc_layers: int = 3
    speech_enc_layers: int = 6
    dec_layers: int = 3
    feature_dims: int = 16
    speech_downsample: int = 4
    dropout: float = 0.1
    max_positions: int = 2048

    def __post_init__(self):
        object.__setattr__(self, "vocab", tuple(self.vocab))
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.d_model % self.n_heads:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.mode == "textual" and self.speech_enc_layers:
            raise ConfigError("textual mode has no speech encoder (speech_enc_layers must be 0)")
        if self.mode == "speech_only" and self.text_enc_layers:
            raise ConfigError("speech_only mode has no text encoder (text_enc_layers must be 0)")
        if self.mode == "multimodal" and not (self.text_enc_layers and self.speech_enc_layers):
            raise ConfigError("multimodal mode needs both encoders")
        ds = self.speech_downsample
        if ds < 1 or ds & (ds - 1):
            raise ConfigError(f"speech_downsample must be a power of two, got {ds}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        Vocabulary(self.vocab)  # validates reserved tokens

    @property
    def has_text(self) -> bool:
        return self.mode in ("textual", "multimodal")

    @property
    def has_speech(self) -> bool:
        return self.mode in ("multimodal", "speech_only")

    def vocabulary(self) -> Vocabulary:
        return Vocabulary(self.vocab)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vocab"] = list(self.vocab)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys {sorted(unknown)}")
        return cls(**d)

    def with_mode(self, mode: str) -> "ModelConfig":
        kw = {"mode": mode}
        if mode == "textual":
            kw["speech_enc_layers"] = 0
            kw["text_enc_layers"] = self.text_enc_layers or 3
        elif mode == "speech_only":
            kw["text_enc_layers"] = 0
            kw["speech_enc_layers"] = self.speech_enc_layers or 6
        return replace(self, **kw)


def toy_config(vocab, mode: str = "multimodal", **overrides) -> ModelConfig:
    """Desk-scale defaults: d_model 64, 4 heads, 3/6/3 layers."""
    base = dict(d_model=64, n_heads=4, ffn_dim=128, text_enc_layers=3, speech_enc_layers=6,
                dec_layers=3)
    if mode == "textual":
        base["speech_enc_layers"] = 0
    elif mode == "speech_only":
        base["text_enc_layers"] = 0
    base.update(overrides)
    return ModelConfig(vocab=tuple(vocab), mode=mode, **base)


def full_scale_config(vocab, mode: str = "multimodal", **overrides) -> ModelConfig:
    """Topology of the full-size systems: 3+3 text layers, 12-layer speech encoder."""
    base = dict(d_model=512, n_heads=8, ffn_dim=2048, text_enc_layers=3, speech_enc_layers=12,
                dec_layers=3, feature_dims=80, dropout=0.1)
    if mode == "textual":
        base["speech_enc_layers"] = 0
    elif mode == "speech_only":
        base.update(text_enc_layers=0, dec_layers=6)
    base.update(overrides)
    return ModelConfig(vocab=tuple(vocab), mode=mode, **base)


@dataclass
class TrainConfig:
    base_lr: float = 1e-3
    warmup_steps: int = 4000
    label_smoothing: float = 0.1
    ctc_weight: float = 0.5
    adam_betas: tuple[float, float] = (0.9, 0.98)
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float = 0.0
    batch_size: int = 16
    max_steps: int = 2000
    seed: int = 1
    log_every: int = 50
    extra: dict = field(default_factory=dict)


def parse_key_values(text: str) -> dict:
    """Parse ``key = value`` lines; values are Python literals or bare strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        try:
            out[key] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            out[key] = value
    return out


def load_key_values(path: str | Path) -> dict:
    return parse_key_values(Path(path).read_text(encoding="utf-8"))
