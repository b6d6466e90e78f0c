"""Greedy and beam-search decoding."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..corpus import FeatureMatrix, SegmentedSentence, feature_array
from .model import EncoderOut, Segmenter
from .vocab import Vocabulary

StepFn = Callable[[list[list[int]]], np.ndarray]


def beam_search(step_fn: StepFn, prefix: Sequence[int], eos: int, beam: int = 5,
                max_len: int = 200) -> list[int]:
    """Length-normalized beam search.

    ``step_fn`` maps a list of prefixes to a ``(n, V)`` array of next-token
    log-probabilities.  At most ``max_len`` tokens are generated (``eos``
    included); the returned ids exclude the prefix and ``eos``.  With
    ``beam=1`` this is exactly greedy decoding.
    """
    prefix = list(prefix)
    hyps: list[tuple[list[int], float]] = [([], 0.0)]
    finished: list[tuple[list[int], float]] = []
    for step in range(max_len):
        logp = np.asarray(step_fn([prefix + h for h, _ in hyps]), dtype=np.float64)
        cands = []
        for k, (h, score) in enumerate(hyps):
            row = logp[k]
            top = np.argsort(-row, kind="stable")[:2 * beam]
            for tok in top:
                if np.isfinite(row[tok]):
                    cands.append((score + float(row[tok]), k, int(tok)))
        cands.sort(key=lambda c: -c[0])
        new_hyps = []
        for rank, (score, k, tok) in enumerate(cands):
            if tok == eos:
                if rank < beam:
                    finished.append((hyps[k][0], score / (len(hyps[k][0]) + 1)))
            elif len(new_hyps) < beam:
                new_hyps.append((hyps[k][0] + [tok], score))
        if len(finished) >= beam or not new_hyps:
            break
        hyps = new_hyps
        if step == max_len - 1:
            finished.extend((h, s / len(h)) for h, s in hyps)
    if not finished:
        return []
    best = max(finished, key=lambda f: f[1])
    return best[0]


def greedy_search(step_fn: StepFn, prefix: Sequence[int], eos: int, max_len: int = 200) -> list[int]:
    out: list[int] = []
    for _ in range(max_len):
        row = np.asarray(step_fn([list(prefix) + out]))[0]
        tok = int(np.argmax(row))
        if tok == eos:
            break
        out.append(tok)
    return out


class ModelStepper:
    """Next-token log-probabilities from a frozen model with cached encoder output."""

    def __init__(self, model: Segmenter, enc: EncoderOut, banned: Sequence[int]):
        self.model = model
        self.enc = enc
        self.banned = list(banned)

    def _expand(self, n: int) -> EncoderOut:
        e = self.enc

        def rep(x):
            return None if x is None else x.expand(n, *x.shape[1:])
        return EncoderOut(rep(e.text), rep(e.text_mask), rep(e.speech), rep(e.speech_mask))

    @torch.no_grad()
    def __call__(self, prefixes: list[list[int]]) -> np.ndarray:
        tgt = torch.as_tensor(prefixes, dtype=torch.long)
        logits = self.model.decode(tgt, self._expand(len(prefixes)))[:, -1]
        lprobs = F.log_softmax(logits.double(), dim=-1)
        if self.banned:
            lprobs[:, self.banned] = float("-inf")
        return lprobs.numpy()


@torch.no_grad()
def prepare(model: Segmenter, vocab: Vocabulary, src_words: Sequence[str] | None,
            features: FeatureMatrix | np.ndarray | None, language: str | None):
    """Encoder output and decoder prefix for one input."""
    model.eval()
    cfg = model.cfg
    dtype = next(model.parameters()).dtype
    src = speech = None
    if cfg.has_text:
        src = torch.as_tensor([vocab.encode_words(src_words)], dtype=torch.long)
    if cfg.has_speech:
        data = feature_array(features)
        speech = torch.as_tensor(np.asarray(data), dtype=dtype).unsqueeze(0)
    enc = model.encode(speech, None, src)
    prefix = [vocab.bos]
    if cfg.has_speech:
        prefix.append(vocab.lang_id(language))
    return enc, prefix


def beam_decode(model: Segmenter, src_words: Sequence[str] | None = None,
                features: FeatureMatrix | np.ndarray | None = None, language: str | None = None,
                beam: int = 5, max_len: int | None = None) -> list[int]:
    """Decode one input to target ids (prefix and ``eos`` removed).

    Multimodal and speech-only models start from ``bos`` plus the language
    token; textual models from ``bos`` alone.
    """
    vocab = model.cfg.vocabulary()
    enc, prefix = prepare(model, vocab, src_words, features, language)
    if max_len is None:
        n_src = len(vocab.encode_words(src_words)) if src_words is not None else 100
        max_len = min(int(n_src * 1.5) + 10, model.cfg.max_positions - len(prefix))
    stepper = ModelStepper(model, enc, vocab.non_output_ids())
    return beam_search(stepper, prefix, vocab.eos, beam, max_len)


def segment_with_model(model: Segmenter, src_words: Sequence[str] | None = None,
                       features=None, language: str | None = None, beam: int = 5,
                       max_len: int | None = None) -> SegmentedSentence:
    ids = beam_decode(model, src_words, features, language, beam, max_len)
    return model.cfg.vocabulary().decode_segmented(ids)
