"""Transformer segmenters: textual, multimodal and speech-only.

All variants share one decoder design.  The decoder self-attention
output (after layer norm) is the query for every cross-attention; in
multimodal mode the text and speech cross-attentions are computed in
parallel from that same query and their outputs summed before the
feed-forward sublayer.  Layers are pre-norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..corpus import feature_array
from ..errors import SubsegError
from .config import ModelConfig


class ModeMismatch(SubsegError):
    pass


class ShapeMismatch(SubsegError):
    pass


def sinusoidal_positions(n: int, d: int) -> torch.Tensor:
    pos = torch.arange(n, dtype=torch.float64).unsqueeze(1)
    half = d // 2
    freq = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float64) / max(half - 1, 1))
    ang = pos * freq.unsqueeze(0)
    table = torch.zeros(n, d, dtype=torch.float64)
    table[:, :half] = torch.sin(ang)
    table[:, half:2 * half] = torch.cos(ang)
    return table


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int, dropout: float = 0.0):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, query, memory, key_padding_mask=None, causal=False, return_weights=False):
        B, Tq, D = query.shape
        Tk = memory.shape[1]
        h, dh = self.n_heads, self.d_head
        q = self.q_proj(query).view(B, Tq, h, dh).transpose(1, 2)
        k = self.k_proj(memory).view(B, Tk, h, dh).transpose(1, 2)
        v = self.v_proj(memory).view(B, Tk, h, dh).transpose(1, 2)
        scores = q @ k.transpose(-1, -2) / math.sqrt(dh)
        if key_padding_mask is not None:
            scores = scores.masked_fill(key_padding_mask[:, None, None, :], float("-inf"))
        if causal:
            future = torch.ones(Tq, Tk, dtype=torch.bool, device=query.device).triu(1)
            scores = scores.masked_fill(future, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        ctx = self.dropout(weights) @ v
        out = self.out_proj(ctx.transpose(1, 2).reshape(B, Tq, D))
        if return_weights:
            return out, weights
        return out


class FeedForward(nn.Module):
    def __init__(self, d_model: int, ffn_dim: int, dropout: float):
        super().__init__()
        self.fc1 = nn.Linear(d_model, ffn_dim)
        self.fc2 = nn.Linear(ffn_dim, d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x):
        return self.fc2(self.dropout(F.relu(self.fc1(x))))


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.self_norm = nn.LayerNorm(cfg.d_model)
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.n_heads, cfg.dropout)
        self.ffn_norm = nn.LayerNorm(cfg.d_model)
        self.ffn = FeedForward(cfg.d_model, cfg.ffn_dim, cfg.dropout)
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, x, pad_mask):
        h = self.self_norm(x)
        x = x + self.dropout(self.self_attn(h, h, pad_mask))
        x = x + self.dropout(self.ffn(self.ffn_norm(x)))
        return x


class DecoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.self_norm = nn.LayerNorm(cfg.d_model)
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.n_heads, cfg.dropout)
        self.cross_norm = nn.LayerNorm(cfg.d_model)
        self.cross_text = MultiHeadAttention(cfg.d_model, cfg.n_heads, cfg.dropout) if cfg.has_text else None
        self.cross_speech = (MultiHeadAttention(cfg.d_model, cfg.n_heads, cfg.dropout)
                             if cfg.has_speech else None)
        self.ffn_norm = nn.LayerNorm(cfg.d_model)
        self.ffn = FeedForward(cfg.d_model, cfg.ffn_dim, cfg.dropout)
        self.dropout = nn.Dropout(cfg.dropout)

    def cross(self, q, text, text_mask, speech, speech_mask):
        out = 0
        if self.cross_text is not None:
            out = out + self.cross_text(q, text, text_mask)
        if self.cross_speech is not None:
            out = out + self.cross_speech(q, speech, speech_mask)
        return out

    def forward(self, x, text, text_mask, speech, speech_mask, tgt_mask=None):
        h = self.self_norm(x)
        x = x + self.dropout(self.self_attn(h, h, tgt_mask, causal=True))
        q = self.cross_norm(x)
        x = x + self.dropout(self.cross(q, text, text_mask, speech, speech_mask))
        x = x + self.dropout(self.ffn(self.ffn_norm(x)))
        return x


class Subsampler(nn.Module):
    """Stride-2 convolutions (kernel 5, GLU) until the total stride is reached."""

    def __init__(self, in_dims: int, d_model: int, factor: int):
        super().__init__()
        n = int(math.log2(factor))
        chans = [in_dims] + [d_model] * n
        self.convs = nn.ModuleList(
            nn.Conv1d(chans[i], 2 * chans[i + 1], kernel_size=5, stride=2, padding=2)
            for i in range(n))

    def out_lengths(self, lengths: torch.Tensor) -> torch.Tensor:
        for _ in self.convs:
            lengths = torch.div(lengths - 1, 2, rounding_mode="floor") + 1
        return lengths

    def forward(self, x, lengths):
        x = x.transpose(1, 2)  # (B, F, T)
        for conv in self.convs:
            x = F.glu(conv(x), dim=1)
        return x.transpose(1, 2), self.out_lengths(lengths)


def lengths_to_padding_mask(lengths: torch.Tensor, max_len: int) -> torch.Tensor:
    return torch.arange(max_len, device=lengths.device)[None, :] >= lengths[:, None]


@dataclass
class EncoderOut:
    text: torch.Tensor | None = None
    text_mask: torch.Tensor | None = None
    speech: torch.Tensor | None = None
    speech_mask: torch.Tensor | None = None
    speech_lengths: torch.Tensor | None = None


class Segmenter(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        V, D = len(cfg.vocab), cfg.d_model
        self.pad_id = cfg.vocab.index("<pad>")
        self.embed = nn.Embedding(V, D, padding_idx=self.pad_id)
        nn.init.normal_(self.embed.weight, 0.0, D ** -0.5)
        with torch.no_grad():
            self.embed.weight[self.pad_id].zero_()
        self.embed_scale = math.sqrt(D)
        self.register_buffer("positions", sinusoidal_positions(cfg.max_positions, D).float(),
                             persistent=False)
        self.dropout = nn.Dropout(cfg.dropout)
        if cfg.has_text:
            self.text_layers = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.text_enc_layers))
            self.text_norm = nn.LayerNorm(D)
        if cfg.has_speech:
            self.subsample = Subsampler(cfg.feature_dims, D, cfg.speech_downsample)
            self.speech_layers = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.speech_enc_layers))
            self.speech_norm = nn.LayerNorm(D)
            self.ctc_proj = nn.Linear(D, V)
        self.dec_layers = nn.ModuleList(DecoderLayer(cfg) for _ in range(cfg.dec_layers))
        self.dec_norm = nn.LayerNorm(D)

    def _pos(self, n, dtype):
        if n > self.positions.shape[0]:
            raise ShapeMismatch(f"sequence of length {n} exceeds max_positions")
        return self.positions[:n].to(dtype)

    def _check_inputs(self, speech, src):
        cfg = self.cfg
        if cfg.has_text != (src is not None) or cfg.has_speech != (speech is not None):
            need = {"textual": "text only", "multimodal": "speech and text",
                    "speech_only": "speech only"}[cfg.mode]
            raise ModeMismatch(f"{cfg.mode} model takes {need}")
        if speech is not None and speech.shape[-1] != cfg.feature_dims:
            raise ShapeMismatch(f"expected {cfg.feature_dims} feature dims, got {speech.shape[-1]}")

    def encode(self, speech=None, speech_lengths=None, src=None) -> EncoderOut:
        self._check_inputs(speech, src)
        out = EncoderOut()
        if src is not None:
            mask = src.eq(self.pad_id)
            x = self.embed(src) * self.embed_scale
            x = self.dropout(x + self._pos(src.shape[1], x.dtype))
            for layer in self.text_layers:
                x = layer(x, mask)
            out.text, out.text_mask = self.text_norm(x), mask
        if speech is not None:
            if speech_lengths is None:
                speech_lengths = torch.full((speech.shape[0],), speech.shape[1], dtype=torch.long)
            x, lengths = self.subsample(speech, speech_lengths)
            mask = lengths_to_padding_mask(lengths, x.shape[1])
            x = self.dropout(x * self.embed_scale + self._pos(x.shape[1], x.dtype))
            for layer in self.speech_layers:
                x = layer(x, mask)
            out.speech, out.speech_mask, out.speech_lengths = self.speech_norm(x), mask, lengths
        return out

    def ctc_logits(self, enc: EncoderOut):
        return self.ctc_proj(enc.speech)

    def decode(self, tgt_in, enc: EncoderOut):
        mask = tgt_in.eq(self.pad_id)
        x = self.embed(tgt_in) * self.embed_scale
        x = self.dropout(x + self._pos(tgt_in.shape[1], x.dtype))
        for layer in self.dec_layers:
            x = layer(x, enc.text, enc.text_mask, enc.speech, enc.speech_mask, mask)
        x = self.dec_norm(x)
        return x @ self.embed.weight.t()

    def forward(self, tgt_in, speech=None, speech_lengths=None, src=None):
        """Decoder logits ``(B, T, V)`` and CTC logits (or ``None``) with their lengths."""
        enc = self.encode(speech, speech_lengths, src)
        logits = self.decode(tgt_in, enc)
        ctc = self.ctc_logits(enc) if enc.speech is not None else None
        return logits, ctc, enc.speech_lengths


def forward(model: Segmenter, tgt_prefix, speech=None, src_text=None):
    """Single-example forward pass.

    ``speech`` is a frames x dims array (or ``FeatureMatrix``), ``src_text``
    and ``tgt_prefix`` are token id sequences.  Returns decoder logits of
    shape ``(len(tgt_prefix), V)`` and, when speech is given, CTC logits.
    """
    dtype = next(model.parameters()).dtype
    if speech is not None:
        data = feature_array(speech)
        speech = torch.as_tensor(data, dtype=dtype).unsqueeze(0)
    src = None if src_text is None else torch.as_tensor(list(src_text), dtype=torch.long).unsqueeze(0)
    tgt = torch.as_tensor(list(tgt_prefix), dtype=torch.long).unsqueeze(0)
    if tgt.ndim != 2 or tgt.shape[1] == 0:
        raise ShapeMismatch("target prefix must be a non-empty id sequence")
    logits, ctc, _ = model(tgt, speech=speech, src=src)
    return logits[0], (None if ctc is None else ctc[0])
