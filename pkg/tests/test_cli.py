import json
import subprocess
import sys

import pytest

from subseg.cli import main
from subseg.neural.checkpoint import load_checkpoint
from subseg.synth import read_manifest

SEGMENTED = [
    "the cat sat on the mat <eol> and looked around <eob> then it slept <eob>",
    "a short one <eob>",
    "we went to the market <eob> and bought bread <eol> and some cheese <eob>",
    "nothing else <eob>",
]
UNSEGMENTED = ["the quick brown fox jumps over the lazy dog near the river bank today",
               "a b c d", "one two three four five six seven eight nine ten eleven twelve"]


@pytest.fixture
def files(tmp_path):
    seg = tmp_path / "seg.txt"
    seg.write_text("\n".join(SEGMENTED) + "\n")
    unseg = tmp_path / "unseg.txt"
    unseg.write_text("\n".join(UNSEGMENTED) + "\n")
    return tmp_path, seg, unseg


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestEval:
    def test_identity_json(self, files, capsys):
        _, seg, _ = files
        code, out, _ = run(["eval", "--hyp", seg, "--ref", seg, "--format", "json"], capsys)
        assert code == 0
        rep = json.loads(out)
        assert set(rep) == {"bleu", "sigma", "cpl", "eol_coverage", "eob_coverage", "pattern_stats", "counts"}
        assert rep["bleu"] == pytest.approx(100.0, abs=1e-9)
        assert rep["sigma"] == pytest.approx(100.0, abs=1e-9)
        assert rep["eol_coverage"] == 0.0 and rep["eob_coverage"] == 0.0
        assert rep["counts"] == {"eol_pred": 2, "eol_ref": 2, "eob_pred": 6, "eob_ref": 6}

    def test_text_format(self, files, capsys):
        _, seg, _ = files
        code, out, _ = run(["eval", "--hyp", seg, "--ref", seg], capsys)
        assert code == 0 and out.startswith("BLEU 100.00")

    def test_pattern_stats_with_function_words(self, files, capsys):
        _, seg, _ = files
        code, out, _ = run(["eval", "--hyp", seg, "--ref", seg, "--format", "json",
                            "--function-words", "es"], capsys)
        assert code == 0 and json.loads(out)["pattern_stats"] is not None


class TestSegment:
    def test_deterministic(self, files, capsys):
        _, _, unseg = files
        argv = ["segment", "--mode", "count-chars", "--limit", 42, "--eol-prob", 0.25, "--seed", 13,
                "--input", unseg]
        first = run(argv, capsys)
        second = run(argv, capsys)
        assert first[0] == 0 and first[1] == second[1]
        assert first[1].splitlines()[0].startswith("the quick brown fox jumps over the lazy <e")

    def test_threads_same_output(self, files, capsys):
        _, _, unseg = files
        argv = ["segment", "--seed", 1, "--input", unseg]
        assert run(argv, capsys)[1] == run(argv + ["--threads", 3], capsys)[1]

    def test_missing_seed(self, files, capsys):
        _, _, unseg = files
        code, out, err = run(["segment", "--input", unseg], capsys)
        assert code == 1 and out == "" and "--seed" in err

    def test_missing_input_is_io_error(self, files, capsys):
        tmp, _, _ = files
        code, _, err = run(["segment", "--seed", 1, "--input", tmp / "nope.txt"], capsys)
        assert code == 2 and "I/O error" in err

    def test_out_file(self, files, capsys):
        tmp, _, unseg = files
        code, out, _ = run(["segment", "--seed", 1, "--input", unseg, "--out", tmp / "o.txt"], capsys)
        assert code == 0 and out == ""
        assert len((tmp / "o.txt").read_text().splitlines()) == 3

    def test_neural_needs_checkpoint(self, files, capsys):
        _, _, unseg = files
        assert run(["segment", "--mode", "neural", "--input", unseg], capsys)[0] == 1


class TestUsage:
    def test_unknown_subcommand(self, capsys):
        code, _, err = run(["frobnicate"], capsys)
        assert code == 1 and "unknown command" in err

    def test_no_command(self, capsys):
        assert run([], capsys)[0] == 1

    def test_bad_flag(self, capsys):
        assert run(["eval", "--hyp"], capsys)[0] == 1

    def test_validation_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("a <eob> <eol> b\n")
        code, _, err = run(["eval", "--hyp", bad, "--ref", bad], capsys)
        assert code == 1 and "sentence 1" in err

    def test_config_file(self, files, capsys):
        tmp, _, unseg = files
        cfg = tmp / "seg.cfg"
        cfg.write_text("# count chars\nlimit = 12\neol_prob = 0.0\n")
        code, out, _ = run(["segment", "--seed", 2, "--input", unseg, "--config", cfg], capsys)
        assert code == 0
        for line in out.splitlines():
            for chunk in line.replace("<eol>", "<eob>").split("<eob>"):
                assert len(chunk.strip()) <= 12
        assert "<eol>" not in out
        # explicit flags win over the file
        code, out2, _ = run(["segment", "--seed", 2, "--input", unseg, "--config", cfg, "--limit", 42],
                            capsys)
        assert out2 != out

    def test_console_script_entry(self, files):
        _, seg, _ = files
        proc = subprocess.run([sys.executable, "-m", "subseg.cli", "eval", "--hyp", str(seg), "--ref",
                               str(seg), "--format", "json"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["bleu"] == pytest.approx(100.0)


class TestDataCommands:
    def test_filter(self, tmp_path, capsys):
        f = tmp_path / "in.txt"
        f.write_text("short <eob>\n" + "x" * 50 + " <eob>\n")
        code, out, err = run(["filter", "--input", f], capsys)
        assert code == 0 and out == "short <eob>\n"
        assert json.loads(err)["kept_sentences"] == 1

    def test_substitute(self, tmp_path, capsys):
        f = tmp_path / "in.txt"
        f.write_text("a <eob> b <eob>\n" * 200)
        code, out, err = run(["substitute", "--input", f, "--p", 0.25, "--seed", 0], capsys)
        assert code == 0
        stats = json.loads(err)
        assert stats["eligible_breaks"] == 200
        assert out.count("<eol>") == stats["substituted_breaks"]
        assert run(["substitute", "--input", f, "--seed", 0], capsys)[1] == out

    def test_balance(self, tmp_path, capsys):
        f = tmp_path / "in.txt"
        f.write_text("a <eob> b <eob>\nc <eob> d <eob>\ne <eob>\n")
        code, out, err = run(["balance", "--input", f, "--seed", 1], capsys)
        assert code == 0
        assert len(out.splitlines()) == 3
        warning, stats = err.splitlines()
        assert warning.startswith("warning: 1 single-subtitle")
        assert json.loads(stats)["shortfall"] == 1

    def test_unsegment(self, files, capsys):
        _, seg, _ = files
        code, out, _ = run(["unsegment", "--input", seg], capsys)
        assert code == 0
        assert "<eob>" not in out and "<eol>" not in out
        assert out.splitlines()[1] == "a short one"

    def test_pattern_stats(self, files, capsys):
        _, seg, _ = files
        code, out, _ = run(["pattern-stats", "--input", seg, "--language", "es", "--format", "json"], capsys)
        assert code == 0
        assert set(json.loads(out)) >= {"eol", "eob"}


class TestSignificance:
    def test_identical_not_significant(self, tmp_path, capsys):
        a = tmp_path / "a.txt"
        a.write_text("\n".join(SEGMENTED) + "\n")
        code, out, _ = run(["significance", "--hyp-a", a, "--hyp-b", a, "--ref", a, "--samples", 1000,
                            "--seed", 1], capsys)
        assert code == 0
        assert "*" in out and "not significant" in out
        code, out, _ = run(["significance", "--hyp-a", a, "--hyp-b", a, "--ref", a, "--seed", 1,
                            "--format", "json"], capsys)
        assert json.loads(out)["significant"] is False


class TestNeuralCommands:
    def test_gradcheck(self, capsys):
        code, out, _ = run(["gradcheck", "--mode", "textual", "--n-params", 30, "--format", "json"], capsys)
        assert code == 0
        assert json.loads(out)["passed"] is True

    def test_synth_train_decode_average(self, tmp_path, capsys):
        seg = tmp_path / "seg.txt"
        seg.write_text("\n".join(SEGMENTED) + "\n")
        manifest = tmp_path / "data" / "train.jsonl"
        manifest.parent.mkdir()
        code, _, _ = run(["synth-speech", "--input", seg, "--language", "en", "--seed", 3,
                          "--feature-dims", 8, "--frames-per-char", 2, "--out", manifest], capsys)
        assert code == 0
        utts = read_manifest(manifest)
        assert len(utts) == 4 and utts[0].features.dims == 8

        cfg = tmp_path / "model.cfg"
        cfg.write_text("d_model = 16\nn_heads = 2\nffn_dim = 32\nspeech_enc_layers = 1\n"
                       "text_enc_layers = 1\ndec_layers = 1\n")
        ckdir = tmp_path / "ckpt"
        code, _, err = run(["train", "--manifest", manifest, "--valid", manifest, "--steps", 14,
                            "--save-every", 2, "--batch-size", 2, "--seed", 0, "--save-dir", ckdir,
                            "--config", cfg, "--log", tmp_path / "log.jsonl", "--log-every", 1], capsys)
        assert code == 0, err
        ckpts = sorted(ckdir.glob("checkpoint*.pt"))
        assert len(ckpts) == 7
        assert load_checkpoint(ckpts[0]).config.d_model == 16
        log = [json.loads(l) for l in (tmp_path / "log.jsonl").read_text().splitlines()]
        assert len(log) == 14 and set(log[0]) == {"step", "lr", "loss", "ctc_loss"}

        avg = tmp_path / "avg.pt"
        code, _, err = run(["avg-ckpt", *ckpts, "--out", avg], capsys)
        assert code == 0, err
        assert len(load_checkpoint(avg).meta["averaged_steps"]) == 7
        code, _, err = run(["avg-ckpt", *ckpts[:3], "--out", avg], capsys)
        assert code == 1 and "expected 7" in err
        assert run(["avg-ckpt", *ckpts, "--around-best", "--out", avg], capsys)[0] == 0

        code, out, err = run(["decode", "--checkpoint", avg, "--manifest", manifest, "--beam", 2], capsys)
        assert code == 0, err
        assert "language token: en" in err
        assert len(out.splitlines()) == 4
        code, _, err = run(["decode", "--checkpoint", avg, "--manifest", manifest, "--language", "fr"],
                           capsys)
        assert code == 1 and "<lang:fr>" in err

    def test_build_dataset(self, tmp_path, capsys):
        seg = tmp_path / "seg.txt"
        seg.write_text("\n".join(SEGMENTED) + "\n")
        unseg = tmp_path / "unseg.txt"
        assert run(["unsegment", "--input", seg, "--out", unseg], capsys)[0] == 0
        speech = tmp_path / "speech.jsonl"
        assert run(["synth-speech", "--input", seg, "--seed", 1, "--out", speech], capsys)[0] == 0
        feats = tmp_path / "feats.txt"
        feats.write_text("\n".join(u.feature_file for u in read_manifest(speech, load=False)) + "\n")
        out = tmp_path / "ds" / "data.jsonl"
        out.parent.mkdir()
        code, _, err = run(["build-dataset", "--source", unseg, "--segmented", seg, "--features", feats,
                            "--language", "de", "--out", out], capsys)
        assert code == 0, err
        utts = read_manifest(out)
        assert [u.target_language for u in utts] == ["de"] * 4
        assert [str(u.target) for u in utts] == SEGMENTED

        short = tmp_path / "short.txt"
        short.write_text("\n".join(SEGMENTED[:3]) + "\n")
        code, _, err = run(["build-dataset", "--source", unseg, "--segmented", short, "--out", out], capsys)
        assert code == 1
