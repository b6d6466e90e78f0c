"""Synthetic SubST corpora: segment unsegmented text zero-shot and pair it with audio.

Also provides a synthetic speech generator in which pauses mark subtitle
breaks, for controlled experiments with the multimodal segmenter.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from multiprocessing.pool import ThreadPool
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import (BREAKS, EOB, EOL, Corpus, FeatureMatrix, SegmentationError, SegmentedSentence,
                     Utterance, check_unique_ids, load_features, parse_segmented, save_features,
                     serialize_segmented, strip_breaks)
from .errors import SubsegError
from .rulebased import CountCharsConfig, count_chars_segment, sentence_rng

log = logging.getLogger(__name__)


class FeatureCountMismatch(SubsegError):
    pass


class CountMismatch(SubsegError):
    pass


class MalformedTarget(SubsegError):
    def __init__(self, utt_id: str, reason: str):
        self.id = utt_id
        super().__init__(f"utterance {utt_id}: {reason}")


class SegmenterFailure(SubsegError):
    def __init__(self, sentence_id, reason: str):
        self.id = sentence_id
        super().__init__(f"sentence {sentence_id}: {reason}")


@dataclass
class SynthConfig:
    segmenter: str = "count_chars"        # or "neural"
    checkpoint: str | None = None
    language_token: str | None = None     # None: pick by character 3-gram overlap
    pause_frames: int = 12
    feature_dims: int = 16
    frames_per_char: int = 6
    seed: int = 0
    limit: int = 42
    eol_prob: float = 0.25
    beam: int = 5

    def __post_init__(self):
        if self.pause_frames < 1:
            raise SubsegError("pause_frames must be >= 1")
        if self.segmenter not in ("count_chars", "neural"):
            raise SubsegError(f"unknown segmenter {self.segmenter!r}")


# --------------------------------------------------------------------------
# synthetic speech

VOICED_NOISE = 0.3
PAUSE_NOISE = 0.05


@lru_cache(maxsize=None)
def _prototype(char: str, dims: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(ord(char)))
    v = rng.normal(size=dims)
    return v / np.sqrt(np.mean(v ** 2))


def pause_length(kind: str, pause_frames: int) -> int:
    return pause_frames if kind == EOB else math.ceil(pause_frames / 2)


def generate_synthetic_speech(sentence: SegmentedSentence, cfg: SynthConfig,
                              rng: np.random.Generator) -> FeatureMatrix:
    """Feature frames for ``sentence`` with a silence at every break.

    Each character of a word contributes ``frames_per_char`` voiced frames
    (a fixed per-character vector plus noise, mean energy around 1).
    ``<eob>`` is followed by ``pause_frames`` near-silent frames and
    ``<eol>`` by half as many, rounded up.
    """
    spans = []
    for tok in sentence.tokens:
        if tok in BREAKS:
            n = pause_length(tok, cfg.pause_frames)
            spans.append(rng.normal(scale=PAUSE_NOISE, size=(n, cfg.feature_dims)))
        else:
            for c in tok:
                proto = _prototype(c, cfg.feature_dims)
                noise = rng.normal(scale=VOICED_NOISE, size=(cfg.frames_per_char, cfg.feature_dims))
                spans.append(proto[None, :] + noise)
    if not spans:
        raise SubsegError("cannot synthesize speech for an empty sentence")
    return FeatureMatrix(np.concatenate(spans, axis=0))


def expected_frames(sentence: SegmentedSentence, cfg: SynthConfig) -> int:
    n = 0
    for tok in sentence.tokens:
        n += pause_length(tok, cfg.pause_frames) if tok in BREAKS else len(tok) * cfg.frames_per_char
    return n


# --------------------------------------------------------------------------
# language token choice


def char_trigram_profile(texts: Sequence[str]) -> Counter:
    prof: Counter = Counter()
    for text in texts:
        words = [w for w in text.split() if w not in BREAKS]
        padded = " " + " ".join(words) + " "
        prof.update(padded[i:i + 3] for i in range(len(padded) - 2))
    return prof


def _cosine(a: Counter, b: Counter) -> float:
    dot = sum(v * b.get(k, 0) for k, v in a.items())
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    return dot / (na * nb) if na and nb else 0.0


def choose_language_token(texts: Sequence[str], profiles: dict[str, Counter]) -> str:
    """Seen language whose character 3-gram profile is closest (cosine) to ``texts``."""
    if not profiles:
        raise SubsegError("no language profiles to choose from")
    target = char_trigram_profile(texts)
    return max(sorted(profiles), key=lambda lang: _cosine(target, profiles[lang]))


# --------------------------------------------------------------------------
# segmentation of a corpus


def _fallback(words: Sequence[str]) -> SegmentedSentence:
    return SegmentedSentence.from_words(words)


def segment_corpus(unseg: Corpus, features: Sequence[FeatureMatrix] | None, cfg: SynthConfig,
                   model=None, threads: int = 1) -> Corpus:
    """Insert breaks into every sentence of ``unseg``.

    Sentence count and order never change.  A sentence the segmenter
    cannot handle, or whose output is not a well-formed sentence, gets the
    degenerate segmentation (a single final ``<eob>``) and is logged.
    """
    if features is not None and len(features) != len(unseg):
        raise FeatureCountMismatch(f"{len(unseg)} sentences but {len(features)} feature matrices")
    if not unseg.sentences:
        return unseg.with_sentences([])

    if cfg.segmenter == "count_chars":
        cc = CountCharsConfig(limit=cfg.limit, eol_prob=cfg.eol_prob, seed=cfg.seed)

        def run(i, words):
            return count_chars_segment(words, cc, sentence_rng(cfg.seed, i))
    else:
        run = _neural_runner(unseg, features, cfg, model)

    def one(i):
        words = strip_breaks(unseg.sentences[i])
        try:
            seg = run(i, words)
            seg.validate(strict=True)
            return seg
        except SubsegError as exc:
            log.warning("%s", SegmenterFailure(i, str(exc)))
            return _fallback(words)

    idx = range(len(unseg))
    if threads > 1:
        with ThreadPool(threads) as pool:
            out = pool.map(one, idx)
    else:
        out = [one(i) for i in idx]
    return unseg.with_sentences(out)


def _neural_runner(unseg: Corpus, features, cfg: SynthConfig, model):
    from .neural.checkpoint import load_checkpoint
    from .neural.decode import segment_with_model

    meta = {}
    if model is None:
        if not cfg.checkpoint:
            raise SubsegError("neural segmenter needs a checkpoint")
        ckpt = load_checkpoint(cfg.checkpoint)
        model = ckpt.build_model()
        meta = ckpt.meta
    mcfg = model.cfg
    if mcfg.has_speech and features is None:
        raise FeatureCountMismatch(f"{mcfg.mode} segmenter needs one feature matrix per sentence")

    language = cfg.language_token
    if mcfg.has_speech:
        if language is None:
            profiles = {k: Counter(v) for k, v in meta.get("language_profiles", {}).items()}
            if not profiles:
                raise SubsegError("no language token given and the checkpoint has no language profiles")
            language = choose_language_token([" ".join(s.words) for s in unseg.sentences], profiles)
            log.info("zero-shot language token: %s", language)
        mcfg.vocabulary().lang_id(language)  # raises for a token the model never saw

    def run(i, words):
        return segment_with_model(model, words if mcfg.has_text else None,
                                  features[i] if mcfg.has_speech else None, language, beam=cfg.beam)
    return run


# --------------------------------------------------------------------------
# datasets


def build_subst_dataset(unseg: Corpus, features: Sequence[FeatureMatrix | None],
                        segmented: Corpus, ids: Sequence[str] | None = None) -> list[Utterance]:
    if not (len(unseg) == len(features) == len(segmented)):
        raise CountMismatch(
            f"{len(unseg)} sources, {len(features)} feature matrices, {len(segmented)} targets")
    if ids is None:
        ids = [f"{segmented.name or 'utt'}_{i:06d}" for i in range(len(unseg))]
    if len(ids) != len(unseg):
        raise CountMismatch(f"{len(ids)} ids for {len(unseg)} sentences")
    utts = []
    for uid, src, feats, tgt in zip(ids, unseg.sentences, features, segmented.sentences):
        u = Utterance(uid, feats, strip_breaks(src), tgt, segmented.language)
        try:
            u.validate()
        except SegmentationError as exc:
            raise MalformedTarget(uid, str(exc)) from None
        utts.append(u)
    check_unique_ids(utts)
    return utts


def write_manifest(utterances: Sequence[Utterance], manifest: str | Path,
                   feature_dir: str | Path | None = None) -> None:
    """Write SPFT feature files and a JSON-lines manifest ``{id, feature_file, source, target}``.

    Feature paths in the manifest are relative to the manifest's directory.
    """
    manifest = Path(manifest)
    feature_dir = Path(feature_dir) if feature_dir else manifest.parent / "features"
    feature_dir.mkdir(parents=True, exist_ok=True)
    with manifest.open("w", encoding="utf-8") as f:
        for u in utterances:
            rel = None
            if u.features is not None:
                path = feature_dir / f"{u.id}.spft"
                save_features(u.features, path)
                rel = str(path.resolve().relative_to(manifest.parent.resolve())) \
                    if path.resolve().is_relative_to(manifest.parent.resolve()) else str(path.resolve())
            rec = {"id": u.id, "feature_file": rel, "source": " ".join(u.source_text),
                   "target": serialize_segmented(u.target)}
            if u.target_language != "und":
                rec["language"] = u.target_language
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_manifest(manifest: str | Path, load: bool = True) -> list[Utterance]:
    manifest = Path(manifest)
    utts = []
    for lineno, line in enumerate(manifest.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        rec = json.loads(line)
        feats = None
        if rec.get("feature_file") and load:
            path = Path(rec["feature_file"])
            if not path.is_absolute():
                path = manifest.parent / path
            feats = load_features(path)
        try:
            target = parse_segmented(rec["target"], strict=True)
        except SegmentationError as exc:
            raise MalformedTarget(rec.get("id", f"line {lineno}"), str(exc)) from None
        utts.append(Utterance(rec["id"], feats, rec["source"].split(), target,
                              rec.get("language", "und"), feature_file=rec.get("feature_file")))
    check_unique_ids(utts)
    return utts


def mean_energy(m: FeatureMatrix, rows=None) -> float:
    data = m.data if rows is None else m.data[rows]
    return float(np.mean(data.astype(np.float64) ** 2))


def pause_rows(sentence: SegmentedSentence, cfg: SynthConfig) -> np.ndarray:
    """Boolean mask over frames: True inside a pause span."""
    mask = []
    for tok in sentence.tokens:
        if tok in BREAKS:
            mask += [True] * pause_length(tok, cfg.pause_frames)
        else:
            mask += [False] * (len(tok) * cfg.frames_per_char)
    return np.array(mask, dtype=bool)


__all__ = [
    "CountMismatch", "FeatureCountMismatch", "MalformedTarget", "SegmenterFailure", "SynthConfig",
    "build_subst_dataset", "char_trigram_profile", "choose_language_token", "expected_frames",
    "generate_synthetic_speech", "mean_energy", "pause_rows", "read_manifest", "segment_corpus",
    "write_manifest", "EOB", "EOL",
]
