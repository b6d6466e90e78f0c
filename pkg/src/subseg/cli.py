"""Command-line entry point: ``subseg <command> [flags]``.

Exit status is 0 on success, 1 on invalid input or flags and 2 on I/O
errors.  Data goes to standard output (or ``--out``), diagnostics to
standard error.  Randomized commands refuse to run without ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from .corpus import Corpus, format_corpus, load_features, parse_corpus, read_corpus
from .errors import SubsegError

log = logging.getLogger("subseg")

RANDOMIZED = {"segment", "substitute", "balance", "train", "synth-speech"}


class UsageError(SubsegError):
    pass


class UnknownSubcommand(UsageError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# --------------------------------------------------------------------------
# helpers


def _read_text(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _corpus(path: str | None, strict: bool = False, language: str = "und") -> Corpus:
    if path is None or path == "-":
        return parse_corpus(sys.stdin.read().splitlines(), strict=strict, language=language)
    return read_corpus(path, strict=strict, language=language)


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit_record(args, record: dict, text: str) -> None:
    if args.format == "json":
        _emit(args, json.dumps(record, sort_keys=True) + "\n")
    else:
        _emit(args, text if text.endswith("\n") else text + "\n")


def _stats(stats) -> None:
    print(json.dumps(stats.as_dict(), sort_keys=True), file=sys.stderr)


# --------------------------------------------------------------------------
# commands


def cmd_segment(args) -> None:
    from .synth import SynthConfig, segment_corpus

    if args.mode == "count-chars":
        corpus = _corpus(args.input)
        cfg = SynthConfig(segmenter="count_chars", limit=args.limit, eol_prob=args.eol_prob,
                          seed=args.seed)
        out = segment_corpus(corpus, None, cfg, threads=args.threads)
    else:
        if not args.checkpoint:
            raise UsageError("--mode neural needs --checkpoint")
        cfg = SynthConfig(segmenter="neural", checkpoint=args.checkpoint,
                          language_token=args.language, beam=args.beam, seed=args.seed or 0)
        if args.manifest:
            from .synth import read_manifest

            utts = read_manifest(args.manifest)
            corpus = Corpus([u.target.from_words(u.source_text) for u in utts])
            feats = [u.features for u in utts]
        else:
            corpus, feats = _corpus(args.input), None
        out = segment_corpus(corpus, feats, cfg, threads=args.threads)
    _emit(args, format_corpus(out))


def cmd_eval(args) -> None:
    from .metrics import evaluate, load_function_words

    hyps = read_corpus(args.hyp)
    refs = read_corpus(args.ref)
    fw = load_function_words(args.function_words) if args.function_words else None
    report = evaluate(hyps.sentences, refs.sentences, limit=args.limit, function_words=fw)
    _emit_record(args, report.as_dict(), report.format_text())


def cmd_filter(args) -> None:
    from .datapipe import filter_conformant

    out, stats = filter_conformant(_corpus(args.input), limit=args.limit)
    _stats(stats)
    _emit(args, format_corpus(out))


def cmd_substitute(args) -> None:
    from .datapipe import eob_to_eol_substitution

    out, stats = eob_to_eol_substitution(_corpus(args.input), p=args.p, seed=args.seed)
    _stats(stats)
    _emit(args, format_corpus(out))


def cmd_balance(args) -> None:
    from .datapipe import InsufficientSingles, balance_single_multi

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", InsufficientSingles)
        out, stats = balance_single_multi(_corpus(args.input), seed=args.seed)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _stats(stats)
    _emit(args, format_corpus(out))


def cmd_unsegment(args) -> None:
    from .datapipe import make_unsegmented

    _emit(args, format_corpus(make_unsegmented(_corpus(args.input))))


def cmd_significance(args) -> None:
    from .metrics import paired_bootstrap

    a = _read_text(args.hyp_a).splitlines()
    b = _read_text(args.hyp_b).splitlines()
    r = _read_text(args.ref).splitlines()
    res = paired_bootstrap(a, b, r, samples=args.samples, seed=args.seed or 0)
    bleu_a, bleu_b = res.bleu_a.score, res.bleu_b.score
    rec = {"bleu_a": bleu_a, "bleu_b": bleu_b, "samples": res.samples,
           "a_better": res.a_better, "b_better": res.b_better, "ties": res.ties,
           "p_value": res.p_value, "significant": res.significant(args.alpha)}
    mark = "" if rec["significant"] else " *"
    text = (f"A {bleu_a:.2f}  B {bleu_b:.2f}{mark}  p = {res.p_value:.4f}  "
            f"({'significant' if rec['significant'] else 'not significant'} at {args.alpha})")
    _emit_record(args, rec, text)


def cmd_pattern_stats(args) -> None:
    from .metrics import break_pattern_stats, load_function_words

    fw = load_function_words(args.language)
    stats = break_pattern_stats(_corpus(args.input).sentences, fw)
    d = stats.as_dict()
    lines = []
    for kind, v in d.items():
        if v is None:
            lines.append(f"{kind}: no breaks")
        else:
            lines.append(f"{kind}: {v['breaks']} breaks, {v['after_punctuation']:.1f}% after punctuation, "
                         f"{v['before_function_word']:.1f}% before function word")
    _emit_record(args, d, "\n".join(lines))


def cmd_gradcheck(args) -> None:
    from .neural.gradcheck import gradient_check

    modes = ("textual", "multimodal", "speech_only") if args.mode == "all" else (args.mode,)
    rec = {m: gradient_check(m, seed=args.seed or 0, n_params=args.n_params) for m in modes}
    ok = all(v < args.tolerance for v in rec.values())
    text = "\n".join(f"{m}: max relative error {v:.2e}" for m, v in rec.items())
    _emit_record(args, {"max_relative_error": rec, "passed": ok}, text)
    if not ok:
        raise SubsegError(f"gradient check above tolerance {args.tolerance}")


def cmd_synth_speech(args) -> None:
    from .corpus import Utterance, strip_breaks
    from .rulebased import sentence_rng
    from .synth import SynthConfig, generate_synthetic_speech, write_manifest

    if not args.out:
        raise UsageError("synth-speech needs --out (manifest path)")
    corpus = _corpus(args.input, strict=True, language=args.language)
    cfg = SynthConfig(pause_frames=args.pause_frames, feature_dims=args.feature_dims,
                      frames_per_char=args.frames_per_char, seed=args.seed)
    utts = []
    for i, s in enumerate(corpus.sentences):
        feats = generate_synthetic_speech(s, cfg, sentence_rng(args.seed, i))
        utts.append(Utterance(f"{args.prefix}{i:06d}", feats, strip_breaks(s), s, args.language))
    write_manifest(utts, args.out, args.feature_dir)
    print(f"wrote {len(utts)} utterances", file=sys.stderr)


def cmd_build_dataset(args) -> None:
    from .synth import build_subst_dataset, write_manifest

    if not args.out:
        raise UsageError("build-dataset needs --out (manifest path)")
    unseg = read_corpus(args.source)
    seg = read_corpus(args.segmented, language=args.language)
    if args.features:
        paths = [p for p in Path(args.features).read_text(encoding="utf-8").splitlines() if p.strip()]
        base = Path(args.features).parent
        feats = [load_features(p if Path(p).is_absolute() else base / p) for p in paths]
    else:
        feats = [None] * len(unseg)
    ids = None
    if args.ids:
        ids = [l.strip() for l in Path(args.ids).read_text(encoding="utf-8").splitlines() if l.strip()]
    utts = build_subst_dataset(unseg, feats, seg, ids)
    write_manifest(utts, args.out, args.feature_dir)
    print(f"wrote {len(utts)} utterances", file=sys.stderr)


def cmd_train(args) -> None:
    import torch

    from .neural.checkpoint import Checkpoint, save_checkpoint
    from .neural.config import TrainConfig, toy_config
    from .neural.model import Segmenter
    from .neural.train import Trainer, batches, make_example, round_robin_batches
    from .neural.vocab import build_char_vocab
    from .synth import char_trigram_profile, read_manifest

    utts = read_manifest(args.manifest)
    if not utts:
        raise SubsegError("empty training manifest")
    valid = read_manifest(args.valid) if args.valid else []
    languages = sorted({u.target_language for u in utts})
    vocab = build_char_vocab([" ".join(u.source_text) for u in utts + valid], languages=languages)
    dims = next((u.features.dims for u in utts if u.features is not None), 16)
    extra = {k: args.config_values[k] for k in ("d_model", "n_heads", "ffn_dim", "text_enc_layers",
                                                "speech_enc_layers", "dec_layers", "dropout")
             if k in args.config_values}
    cfg = toy_config(vocab.tokens, args.mode, feature_dims=dims, **extra)
    tcfg = TrainConfig(base_lr=args.lr, warmup_steps=args.warmup, batch_size=args.batch_size,
                       max_steps=args.steps, seed=args.seed, log_every=args.log_every)
    torch.manual_seed(args.seed)
    model = Segmenter(cfg)

    def ex(u):
        return make_example(vocab, cfg, u.target, u.source_text, u.features,
                            language=u.target_language)

    by_lang = {l: [ex(u) for u in utts if u.target_language == l] for l in languages}
    if len(by_lang) > 1:
        stream = round_robin_batches(by_lang, args.batch_size, args.seed, vocab.pad)
    else:
        stream = batches(by_lang[languages[0]], args.batch_size, args.seed, vocab.pad)
    valid_batches = [b for b in _chunks([ex(u) for u in valid], args.batch_size, vocab.pad)]
    profiles = {l: dict(char_trigram_profile([" ".join(u.source_text) for u in utts
                                              if u.target_language == l])) for l in languages}
    save_dir = Path(args.save_dir)
    save_dir.mkdir(parents=True, exist_ok=True)
    log_file = open(args.log, "w", encoding="utf-8") if args.log else None
    try:
        trainer = Trainer(model, tcfg, log_file)
        for step in range(1, args.steps + 1):
            trainer.train_step(next(stream))
            if step % args.save_every == 0 or step == args.steps:
                val = trainer.validation_loss(valid_batches) if valid_batches else None
                ckpt = Checkpoint.from_model(model, step, val, meta={"language_profiles": profiles})
                save_checkpoint(ckpt, save_dir / f"checkpoint{step}.pt")
                print(f"step {step}: saved checkpoint" + (f", valid nll {val:.4f}" if val else ""),
                      file=sys.stderr)
    finally:
        if log_file:
            log_file.close()


def _chunks(examples, size, pad):
    from .neural.train import collate

    for i in range(0, len(examples), size):
        yield collate(examples[i:i + size], pad)


def cmd_decode(args) -> None:
    from .neural.checkpoint import load_checkpoint
    from .synth import SynthConfig, segment_corpus

    ckpt = load_checkpoint(args.checkpoint)
    model = ckpt.build_model()
    cfg = SynthConfig(segmenter="neural", language_token=args.language, beam=args.beam)
    if args.manifest:
        from .synth import read_manifest

        utts = read_manifest(args.manifest)
        corpus = Corpus([u.target.from_words(u.source_text) for u in utts])
        feats = [u.features for u in utts]
    elif model.cfg.has_speech:
        raise UsageError(f"a {model.cfg.mode} checkpoint needs --manifest with features")
    else:
        corpus, feats = _corpus(args.input), None
    if cfg.language_token is None and model.cfg.has_speech:
        from collections import Counter

        from .synth import choose_language_token

        profiles = {k: Counter(v) for k, v in ckpt.meta.get("language_profiles", {}).items()}
        if not profiles:
            raise UsageError("--language is required for this checkpoint")
        cfg.language_token = choose_language_token([" ".join(s.words) for s in corpus], profiles)
        print(f"language token: {cfg.language_token}", file=sys.stderr)
    out = segment_corpus(corpus, feats, cfg, model=model, threads=args.threads)
    _emit(args, format_corpus(out))


def cmd_avg_ckpt(args) -> None:
    from .neural.checkpoint import (Checkpoint, average_checkpoints, load_checkpoint,
                                    save_checkpoint, select_around_best)

    if not args.out:
        raise UsageError("avg-ckpt needs --out")
    ckpts = [load_checkpoint(p) for p in args.checkpoints]
    if args.around_best:
        ckpts = select_around_best(ckpts)
    params = average_checkpoints(ckpts, allow_any_count=args.any_count)
    best = ckpts[len(ckpts) // 2]
    save_checkpoint(Checkpoint(best.config, params, best.step, None,
                               {**best.meta, "averaged_steps": [c.step for c in ckpts]}), args.out)
    print(f"averaged {len(ckpts)} checkpoints", file=sys.stderr)


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--config", default=None, help="file of key = value defaults")
    common.add_argument("--out", default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="subseg", description="Subtitle segmentation toolkit.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help):
        sp = sub.add_parser(name, parents=[common], help=help)
        sp.set_defaults(func=func)
        return sp

    sp = add("segment", cmd_segment, "insert subtitle breaks")
    sp.add_argument("--mode", choices=("count-chars", "neural"), default="count-chars")
    sp.add_argument("--input", default=None)
    sp.add_argument("--limit", type=int, default=42)
    sp.add_argument("--eol-prob", type=float, default=0.25)
    sp.add_argument("--checkpoint")
    sp.add_argument("--manifest")
    sp.add_argument("--language")
    sp.add_argument("--beam", type=int, default=5)

    sp = add("eval", cmd_eval, "score hypotheses against references")
    sp.add_argument("--hyp", required=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--limit", type=int, default=42)
    sp.add_argument("--function-words", default=None, help="language code of a bundled list")

    sp = add("filter", cmd_filter, "keep sentences whose lines fit the limit")
    sp.add_argument("--input")
    sp.add_argument("--limit", type=int, default=42)

    sp = add("substitute", cmd_substitute, "turn some <eob> into <eol>")
    sp.add_argument("--input")
    sp.add_argument("--p", type=float, default=0.25)

    sp = add("balance", cmd_balance, "balance single- and multi-subtitle sentences")
    sp.add_argument("--input")

    sp = add("unsegment", cmd_unsegment, "remove breaks")
    sp.add_argument("--input")

    sp = add("significance", cmd_significance, "paired bootstrap test")
    sp.add_argument("--hyp-a", required=True)
    sp.add_argument("--hyp-b", required=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--alpha", type=float, default=0.05)

    sp = add("pattern-stats", cmd_pattern_stats, "break placement patterns")
    sp.add_argument("--input")
    sp.add_argument("--language", required=True)

    sp = add("gradcheck", cmd_gradcheck, "finite-difference gradient check")
    sp.add_argument("--mode", choices=("all", "textual", "multimodal", "speech_only"), default="all")
    sp.add_argument("--n-params", type=int, default=256)
    sp.add_argument("--tolerance", type=float, default=1e-4)

    sp = add("synth-speech", cmd_synth_speech, "synthetic speech for a segmented corpus")
    sp.add_argument("--input")
    sp.add_argument("--language", default="und")
    sp.add_argument("--pause-frames", type=int, default=12)
    sp.add_argument("--feature-dims", type=int, default=16)
    sp.add_argument("--frames-per-char", type=int, default=6)
    sp.add_argument("--feature-dir")
    sp.add_argument("--prefix", default="utt")

    sp = add("build-dataset", cmd_build_dataset, "pair segmented text with audio features")
    sp.add_argument("--source", required=True)
    sp.add_argument("--segmented", required=True)
    sp.add_argument("--features", help="file listing one SPFT path per sentence")
    sp.add_argument("--ids")
    sp.add_argument("--language", default="und")
    sp.add_argument("--feature-dir")

    sp = add("train", cmd_train, "train a toy segmenter from a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--valid")
    sp.add_argument("--mode", choices=("textual", "multimodal", "speech_only"), default="multimodal")
    sp.add_argument("--steps", type=int, default=2000)
    sp.add_argument("--lr", type=float, default=2e-3)
    sp.add_argument("--warmup", type=int, default=200)
    sp.add_argument("--batch-size", type=int, default=10)
    sp.add_argument("--save-every", type=int, default=250)
    sp.add_argument("--save-dir", required=True)
    sp.add_argument("--log", help="JSON-lines training log")
    sp.add_argument("--log-every", type=int, default=50)

    sp = add("decode", cmd_decode, "segment with a trained checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--manifest")
    sp.add_argument("--input")
    sp.add_argument("--language")
    sp.add_argument("--beam", type=int, default=5)

    sp = add("avg-ckpt", cmd_avg_ckpt, "average checkpoints")
    sp.add_argument("checkpoints", nargs="+")
    sp.add_argument("--around-best", action="store_true",
                    help="keep the best checkpoint and three on either side")
    sp.add_argument("--any-count", action="store_true")
    return p


def _parse(argv):
    from .neural.config import load_key_values

    parser = build_parser()
    if argv and argv[0] not in parser._subparsers._group_actions[0].choices and not argv[0].startswith("-"):
        raise UnknownSubcommand(f"unknown command {argv[0]!r}")
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise UsageError("no command given")
    args.config_values = {}
    if args.config:
        values = {k.replace("-", "_"): v for k, v in load_key_values(args.config).items()}
        args.config_values = values
        sp = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sp._actions}
        sp.set_defaults(**{k: v for k, v in values.items() if k in known})
        args = parser.parse_args(argv)
        args.config_values = values
    if args.command in RANDOMIZED and args.seed is None:
        if not (args.command == "segment" and args.mode == "neural"):
            raise UsageError(f"{args.command} is randomized: --seed is required")
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(argv)
    except UsageError as exc:
        print(f"subseg: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (SubsegError, ValueError) as exc:
        print(f"subseg: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"subseg: I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
