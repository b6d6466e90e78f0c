"""Desk-scale experiments on synthetic languages with pause-marked speech.

Two experiments:

* ``run_copy_experiment``: a multimodal segmenter overfits 50 synthetic
  utterances and must reproduce their text and breaks exactly.
* ``run_zero_shot_experiment``: textual and multimodal segmenters train on
  two synthetic languages and segment a third, unseen one.  Reference
  breaks are partly forced by a line limit and partly random; only the
  audio reveals the random ones, through pauses.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import torch

from .corpus import EOB, EOL, SegmentedSentence, Utterance
from .metrics.segmentation import exact_placement, placement_f1
from .neural.config import TrainConfig, toy_config
from .neural.decode import segment_with_model
from .neural.model import Segmenter
from .neural.train import Trainer, make_example, round_robin_batches, train
from .neural.vocab import build_char_vocab
from .rulebased import sentence_rng
from .synth import SynthConfig, char_trigram_profile, choose_language_token, generate_synthetic_speech

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticLanguage:
    """Words are built from syllables ``onset + nucleus + coda`` over a shared alphabet."""

    name: str
    onsets: tuple[str, ...]
    nuclei: tuple[str, ...]
    codas: tuple[str, ...]
    syllables: tuple[int, int] = (1, 3)

    def word(self, rng: np.random.Generator) -> str:
        n = int(rng.integers(self.syllables[0], self.syllables[1] + 1))
        return "".join(self.onsets[rng.integers(len(self.onsets))]
                       + self.nuclei[rng.integers(len(self.nuclei))]
                       + self.codas[rng.integers(len(self.codas))] for _ in range(n))

    def sentence(self, rng: np.random.Generator, n_words: int) -> list[str]:
        return [self.word(rng) for _ in range(n_words)]


LANGUAGES = {
    "aa": SyntheticLanguage("aa", tuple("ptkmn"), tuple("aiu"), ("",)),
    "bb": SyntheticLanguage("bb", tuple("bdgslr"), ("e", "o", "ei"), ("", "n", "s")),
    "cc": SyntheticLanguage("cc", tuple("ptbdsmr"), ("a", "e", "o", "u"), ("", "r", "l")),
}


def random_reference(words: Sequence[str], rng: np.random.Generator, limit: int = 20,
                     min_line: int = 8, break_prob: float = 0.3,
                     eol_prob: float = 0.3) -> SegmentedSentence:
    """Reference breaks: forced where the next word would pass ``limit``,
    otherwise random once a line holds ``min_line`` characters.

    A break is ``<eol>`` with probability ``eol_prob`` unless the current
    block already has two lines; the sentence ends with ``<eob>``.
    """
    tokens: list[str] = []
    line = 0
    prev = None
    for i, w in enumerate(words):
        if i > 0:
            forced = line + 1 + len(w) > limit
            if forced or (line >= min_line and rng.random() < break_prob):
                kind = EOL if prev != EOL and rng.random() < eol_prob else EOB
                tokens.append(kind)
                prev = kind
                line = 0
        tokens.append(w)
        line += len(w) + (1 if line else 0)
    tokens.append(EOB)
    return SegmentedSentence(tuple(tokens))


def make_utterances(language: str, n: int, seed: int, words: tuple[int, int] = (4, 10),
                    synth: SynthConfig | None = None, **ref_kw) -> list[Utterance]:
    synth = synth or SynthConfig(seed=seed)
    lang = LANGUAGES[language]
    utts = []
    for i in range(n):
        rng = sentence_rng(seed, i)
        text = lang.sentence(rng, int(rng.integers(words[0], words[1] + 1)))
        ref = random_reference(text, rng, **ref_kw)
        feats = generate_synthetic_speech(ref, synth, rng)
        utts.append(Utterance(f"{language}_{seed}_{i:05d}", feats, text, ref, language))
    return utts


# --------------------------------------------------------------------------
# training and scoring


@dataclass
class RunConfig:
    steps: int = 2000
    batch_size: int = 10
    base_lr: float = 2e-3
    warmup_steps: int = 200
    eval_every: int = 250
    beam: int = 5
    d_model: int = 64
    seed: int = 0


def shared_vocab():
    alphabet = sorted(set("".join(c for l in LANGUAGES.values()
                                  for part in (l.onsets, l.nuclei, l.codas) for c in "".join(part))))
    return build_char_vocab([" ".join(alphabet)], languages=sorted(LANGUAGES))


def fit(mode: str, data: dict[str, list[Utterance]], run: RunConfig, stop=None):
    """Train a toy segmenter on ``data`` (language -> utterances), one batch per language in turn."""
    vocab = shared_vocab()
    cfg = toy_config(vocab.tokens, mode, d_model=run.d_model, feature_dims=SynthConfig().feature_dims)
    torch.manual_seed(run.seed)
    model = Segmenter(cfg)
    tcfg = TrainConfig(base_lr=run.base_lr, warmup_steps=run.warmup_steps, batch_size=run.batch_size,
                       max_steps=run.steps, seed=run.seed)
    examples = {l: [make_example(vocab, cfg, u.target, u.source_text, u.features, language=l)
                    for u in utts] for l, utts in data.items()}
    stream = round_robin_batches(examples, run.batch_size, run.seed, vocab.pad)
    trainer = Trainer(model, tcfg)
    done = 0
    history = []
    while done < run.steps:
        n = min(run.eval_every, run.steps - done)
        history += train(trainer, stream, n)
        done += n
        if stop is not None and stop(model, done):
            break
    model.eval()
    return model, history


def segment_all(model: Segmenter, utts: Sequence[Utterance], language: str | None,
                beam: int = 5) -> list[SegmentedSentence]:
    text = model.cfg.has_text
    speech = model.cfg.has_speech
    return [segment_with_model(model, u.source_text if text else None,
                               u.features if speech else None, language, beam=beam) for u in utts]


def score(hyps: Sequence[SegmentedSentence], refs: Sequence[SegmentedSentence]) -> dict:
    return {
        "exact_placement": exact_placement(hyps, refs),
        "text_preservation": 100.0 * sum(h.words == r.words for h, r in zip(hyps, refs)) / len(refs),
        "eob_f1": placement_f1(hyps, refs, EOB),
        "eol_f1": placement_f1(hyps, refs, EOL),
    }


# --------------------------------------------------------------------------
# experiments


def run_copy_experiment(n_utts: int = 50, run: RunConfig | None = None, language: str = "aa",
                        target_exact: float = 95.0) -> dict:
    """Overfit a multimodal segmenter; stop at the first evaluation meeting the target."""
    run = run or RunConfig()
    utts = make_utterances(language, n_utts, seed=run.seed)
    refs = [u.target for u in utts]
    result: dict = {}
    t0 = time.perf_counter()

    def stop(model, step):
        hyps = segment_all(model, utts, language, run.beam)
        s = score(hyps, refs)
        s["step"] = step
        result.update(s)
        log.info("copy step %d: %s", step, s)
        return s["exact_placement"] >= target_exact and s["text_preservation"] == 100.0

    fit("multimodal", {language: utts}, run, stop=stop)
    result["seconds"] = time.perf_counter() - t0
    return result


@dataclass
class ZeroShotConfig:
    train_languages: tuple[str, ...] = ("aa", "bb")
    test_language: str = "cc"
    n_train: int = 2000
    n_test: int = 100
    seeds: tuple[int, ...] = (0, 1, 2)
    run: RunConfig = field(default_factory=lambda: RunConfig(steps=1500, eval_every=1500))


def run_zero_shot_experiment(cfg: ZeroShotConfig | None = None) -> dict:
    """EOB placement F1 of textual vs multimodal segmenters on an unseen language."""
    cfg = cfg or ZeroShotConfig()
    per_seed = []
    t0 = time.perf_counter()
    for seed in cfg.seeds:
        run = RunConfig(**{**asdict(cfg.run), "seed": seed})
        data = {l: make_utterances(l, cfg.n_train, seed=1000 * seed + k)
                for k, l in enumerate(cfg.train_languages)}
        test = make_utterances(cfg.test_language, cfg.n_test, seed=1000 * seed + 999)
        refs = [u.target for u in test]
        profiles = {l: char_trigram_profile([" ".join(u.source_text) for u in utts])
                    for l, utts in data.items()}
        token = choose_language_token([" ".join(u.source_text) for u in test], profiles)
        row = {"seed": seed, "language_token": token}
        for mode in ("textual", "multimodal"):
            model, _ = fit(mode, data, run)
            hyps = segment_all(model, test, token if mode == "multimodal" else None, run.beam)
            row[mode] = score(hyps, refs)
            log.info("zero-shot seed %d %s: %s", seed, mode, row[mode])
        per_seed.append(row)
    mean = {m: float(np.mean([r[m]["eob_f1"] for r in per_seed])) for m in ("textual", "multimodal")}
    return {
        "per_seed": per_seed,
        "textual_eob_f1": mean["textual"],
        "multimodal_eob_f1": mean["multimodal"],
        "gap": mean["multimodal"] - mean["textual"],
        "seconds": time.perf_counter() - t0,
    }


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    print(json.dumps(run_copy_experiment(), indent=2))
    print(json.dumps(run_zero_shot_experiment(), indent=2))
