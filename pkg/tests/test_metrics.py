import itertools
import json
import math
import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from subseg.corpus import EOB, EOL, SegmentedSentence, parse_segmented
from subseg.errors import EmptyCorpus, LengthMismatch
from subseg.metrics import (PUNCTUATION, BreakCounts, ZeroReferenceBreaks, ZeroUpperBound, bleu,
                            bleu_tokens, break_coverage, break_pattern_stats, count_breaks,
                            cpl_conformity, evaluate, exact_placement, load_function_words,
                            paired_bootstrap, placement_f1, project_breaks, sigma, sigma_details,
                            tokenize_13a)
from subseg.metrics.significance import BootstrapResult

from .conftest import strict_sentences


def P(line):
    return parse_segmented(line)


# --------------------------------------------------------------------------
# independent oracles


def ngram_oracle(hyp, ref, n):
    """Clipped matches and total n-grams by explicit list scanning."""
    hg = [tuple(hyp[i:i + n]) for i in range(len(hyp) - n + 1)]
    rg = [tuple(ref[i:i + n]) for i in range(len(ref) - n + 1)]
    used = [False] * len(rg)
    m = 0
    for g in hg:
        for k, r in enumerate(rg):
            if not used[k] and r == g:
                used[k] = True
                m += 1
                break
    return m, len(hg)


def bleu_oracle(hyps, refs):
    m = [0] * 4
    t = [0] * 4
    hl = rl = 0
    for h, r in zip(hyps, refs):
        for n in range(1, 5):
            a, b = ngram_oracle(h, r, n)
            m[n - 1] += a
            t[n - 1] += b
        hl += len(h)
        rl += len(r)
    logs, s = [], 1
    for n in range(4):
        if t[n] == 0:
            continue
        if m[n] == 0:
            s *= 2
            logs.append(math.log(1 / (s * t[n])))
        else:
            logs.append(math.log(m[n] / t[n]))
    if hl == 0 or not logs:
        return 0.0
    bp = 1.0 if hl > rl else math.exp(1 - rl / hl)
    return 100 * bp * math.exp(sum(logs) / len(logs))


def sacrebleu_13a(line):
    """The 13a rules with the original consuming regexes."""
    line = line.replace("<skipped>", "").replace("-\n", "").replace("\n", " ")
    for a, b in (("&quot;", '"'), ("&amp;", "&"), ("&lt;", "<"), ("&gt;", ">")):
        line = line.replace(a, b)
    line = f" {line} "
    line = re.sub(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])", r" \1 ", line)
    line = re.sub(r"([^0-9])([\.,])", r"\1 \2 ", line)
    line = re.sub(r"([\.,])([^0-9])", r" \1 \2", line)
    line = re.sub(r"([0-9])(-)", r"\1 \2 ", line)
    return line.split()


# --------------------------------------------------------------------------


class TestTokenizer:
    @pytest.mark.parametrize("text,expected", [
        ("Hello, world!", ["Hello", ",", "world", "!"]),
        ("3.5", ["3.5"]),
        ("a <eob> b.", ["a", "<eob>", "b", "."]),
        ("x &amp; y", ["x", "&", "y"]),
        ("1-2", ["1", "-", "2"]),
        ("a-b", ["a-b"]),
        ("Mr. O'Neil (hi)", ["Mr", ".", "O'Neil", "(", "hi", ")"]),
        ("x <skipped> y", ["x", "y"]),
        ("up-\nwards", ["upwards"]),
        ("1,000.50 $", ["1,000.50", "$"]),
    ])
    def test_examples(self, text, expected):
        assert tokenize_13a(text) == expected

    def test_break_protection(self):
        assert tokenize_13a("a <eol> b") == ["a", "<eol>", "b"]
        assert tokenize_13a("a <eol> b", protect_breaks=False) == ["a", "<", "eol", ">", "b"]
        assert tokenize_13a("a<eob> b") == ["a", "<", "eob", ">", "b"]

    @given(st.text(alphabet="ab1.,-<>& \n'", max_size=30).filter(
        lambda t: not re.search(r"[.,\-]{2}|[.,\-][0-9][.,\-]", t)))
    def test_matches_reference_rules(self, text):
        # outside runs of adjacent separators the lookaround rules equal the original ones
        assert tokenize_13a(text, protect_breaks=False) == sacrebleu_13a(text)

    @given(st.text(alphabet="ab01.,-'\"()<>&;:$ ", max_size=40))
    def test_idempotent(self, text):
        once = tokenize_13a(text)
        assert tokenize_13a(" ".join(once)) == once

    def test_idempotent_on_runs(self):
        for text in ("..407", "1..5", "a-.-9", ",.,", "9-.5", "3.-"):
            once = tokenize_13a(text)
            assert tokenize_13a(" ".join(once)) == once


class TestBleu:
    def test_hand_case(self):
        # p = 3/4, 2/3, 1/2 and 1/(2*1) after one smoothing step; bp = 1
        expected = 100 * (0.75 * (2 / 3) * 0.5 * 0.5) ** 0.25
        b = bleu(["a b c d"], ["a b c e"])
        assert b.score == pytest.approx(expected, abs=1e-9)
        assert b.score == pytest.approx(59.46035575, abs=1e-6)
        assert b.precisions == pytest.approx((0.75, 2 / 3, 0.5, 0.5))
        assert b.brevity_penalty == 1.0

    def test_identity(self):
        refs = ["the cat sat on the mat .", "hello", "a b c d e f"]
        assert bleu(refs, refs).score == pytest.approx(100.0, abs=1e-9)

    def test_empty_hyp(self):
        assert bleu([""], ["a"]).score == 0.0

    def test_effective_order(self):
        # a two-token corpus has no 3- or 4-grams; only orders 1 and 2 count
        assert bleu(["a b"], ["a b"]).score == pytest.approx(100.0)
        assert bleu(["a"], ["a"]).score == pytest.approx(100.0)

    def test_brevity(self):
        b = bleu(["a b"], ["a b c d"])
        assert b.brevity_penalty == pytest.approx(math.exp(1 - 4 / 2))

    def test_no_smoothing(self):
        assert bleu(["a b c d"], ["a b c e"], smoothing="none").score == 0.0

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            bleu(["a"], ["a", "b"])
        with pytest.raises(EmptyCorpus):
            bleu([], [])

    @given(st.lists(st.tuples(st.lists(st.sampled_from("abcd"), max_size=8),
                              st.lists(st.sampled_from("abcd"), min_size=1, max_size=8)),
                    min_size=1, max_size=5))
    def test_matches_oracle(self, pairs):
        hyps = [h for h, _ in pairs]
        refs = [r for _, r in pairs]
        assert bleu_tokens(hyps, refs).score == pytest.approx(bleu_oracle(hyps, refs), abs=1e-9)

    @given(st.lists(st.text("abc ", min_size=1).filter(str.strip), min_size=1, max_size=6), st.randoms())
    def test_identity_and_permutation(self, refs, rnd):
        assert bleu(refs, refs).score == pytest.approx(100.0, abs=1e-9)
        hyps = [r[::-1] for r in refs]
        order = list(range(len(refs)))
        rnd.shuffle(order)
        a = bleu(hyps, refs).score
        b = bleu([hyps[i] for i in order], [refs[i] for i in order]).score
        assert a == pytest.approx(b, abs=1e-9)
        assert 0.0 <= a <= 100.0


def _placements(words, max_breaks):
    """Every sentence over ``words`` with a final <eob> and at most ``max_breaks`` breaks."""
    n = len(words)
    for gaps in itertools.product((None, EOL, EOB), repeat=n - 1):
        if sum(g is not None for g in gaps) + 1 > max_breaks:
            continue
        toks = []
        for w, g in zip(words, gaps):
            toks.append(w)
            if g:
                toks.append(g)
        toks += [words[-1], EOB]
        yield SegmentedSentence(tuple(toks))


def _small_refs(max_tokens=8, max_breaks=3):
    for n in range(1, max_tokens):
        for ws in itertools.product("ab", repeat=n):
            for s in _placements(list(ws), max_breaks):
                if len(s) <= max_tokens:
                    yield s


class TestSigma:
    def test_identity(self):
        refs = [P("a b <eol> c <eob>"), P("d e <eob> f <eob>")]
        assert sigma(refs, refs) == pytest.approx(100.0)

    def test_no_breaks_below_100(self):
        assert sigma([P("a b c d")], [P("a b <eob> c d <eob>")]) < 100.0

    def test_misplaced_eob_against_exhaustive_oracle(self):
        refs = [P("a b c <eob> d e <eob>"), P("f g <eob> h i j <eob>")]
        hyps = [P("a b <eob> c d e <eob>"), P("f g <eob> h i j <eob>")]
        value, achieved, upper = sigma_details(hyps, refs)
        # exhaustive search over the first hypothesis' placements
        best = max(bleu_tokens([list(s.tokens), list(hyps[1].tokens)],
                               [list(r.tokens) for r in refs]).score
                   for s in _placements(hyps[0].words, 3))
        assert upper.score == pytest.approx(best, abs=1e-9)
        assert value == pytest.approx(100 * achieved.score / best, abs=1e-9)
        assert value < 100.0

    def test_exhaustive_never_above_oracle(self):
        # the acceptance suite runs the same check up to 8 tokens
        n = 0
        for ref in _small_refs(max_tokens=6):
            for hyp in _placements(ref.words, 3):
                assert sigma([hyp], [ref]) <= 100.0 + 1e-9
                n += 1
        assert n > 500

    def test_projection_with_deletion(self):
        ref = ["a", "b", "<eol>", "c", "<eob>"]
        # "b" deleted: its break attaches to the preceding aligned token "a"
        assert project_breaks(["a", "c"], ref) == ["a", "<eol>", "c", "<eob>"]
        # nothing aligned before the break: it goes at the start
        assert project_breaks(["x", "c"], ["a", "<eob>", "c", "<eob>"]) == ["x", "<eob>", "c", "<eob>"]

    def test_zero_upper_bound(self):
        # smoothing keeps BLEU positive unless the hypothesis is empty, and projected
        # breaks always match, so only an empty hypothesis on a break-free reference
        with pytest.raises(ZeroUpperBound):
            sigma([""], ["a"])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            sigma(["a <eob>"], [])


class TestCplAndCoverage:
    def test_cpl(self):
        assert cpl_conformity([P("a b <eob>")]) == 100.0
        assert cpl_conformity([P("x" * 43 + " <eol> y <eob>")]) == 50.0
        with pytest.raises(EmptyCorpus):
            cpl_conformity([])

    @pytest.mark.parametrize("pred,ref,expected", [(90, 100, -10.0), (100, 100, 0.0), (1004, 1000, 0.4)])
    def test_coverage_exact(self, pred, ref, expected):
        assert break_coverage(BreakCounts(0, 1, pred, ref), EOB) == expected
        assert break_coverage(BreakCounts(pred, ref, 0, 1), EOL) == expected

    def test_zero_reference(self):
        with pytest.raises(ZeroReferenceBreaks):
            break_coverage(BreakCounts(1, 0, 1, 1), EOL)

    @given(st.integers(0, 10 ** 6), st.integers(1, 10 ** 6))
    def test_linear(self, pred, ref):
        c = break_coverage(BreakCounts(pred, ref, 0, 1), EOL)
        assert c == pytest.approx(pred / ref * 100 - 100, rel=1e-12, abs=1e-9)
        assert break_coverage(BreakCounts(ref, ref, 0, 1), EOL) == 0.0

    def test_counts(self):
        c = count_breaks([P("a <eol> b <eob>")], [P("a <eob> b <eob>")])
        assert c == BreakCounts(1, 0, 1, 2)


class TestPatterns:
    def test_examples(self):
        s = break_pattern_stats([P("hola , <eob> mundo .")], [])
        assert s.eob.after_punctuation == 100.0
        assert s.eol is None

    def test_hand_corpus(self):
        sents = [P("hola , <eob> y mundo <eob>"), P("a . <eob> b <eob>"), P("c d")]
        s = break_pattern_stats(sents, ["y"])
        # 4 <eob>: after ",", after "mundo", after ".", after "b"
        assert s.eob.breaks == 4
        assert s.eob.after_punctuation == 50.0
        assert s.eob.before_function_word == 25.0

    def test_function_word_lists(self):
        es = load_function_words("es")
        nl = load_function_words("nl")
        assert {"de", "y", "que"} <= es
        assert {"en", "van", "maar"} <= nl

    def test_punctuation_set(self):
        assert set('.,!?:;…"\')]}»—') == PUNCTUATION

    def test_empty(self):
        with pytest.raises(EmptyCorpus):
            break_pattern_stats([], [])


class TestPlacement:
    def test_f1(self):
        refs = [P("a b <eob> c d <eob>")]
        assert placement_f1(refs, refs) == 100.0
        assert placement_f1([P("a <eob> b c d <eob>")], refs) == 0.0
        assert placement_f1([P("a b <eob> c <eob> d <eob>")], refs) == pytest.approx(100 * 2 / 3)
        assert placement_f1([P("a b <eob> c d <eob>")], [P("a b c d <eob>")]) == 0.0
        assert exact_placement([P("a b c d <eob>")], refs) == 0.0

    def test_text_differences(self):
        ref = [P("a b <eob> c d <eob>")]
        assert placement_f1([P("a x <eob> c d <eob>")], ref) == 100.0
        assert exact_placement([P("a b <eob> c d <eob>")], ref) == 100.0


class TestBootstrap:
    refs = [f"sentence number {i} is here ." for i in range(40)]

    def test_identical_not_significant(self):
        r = paired_bootstrap(self.refs, self.refs, self.refs, samples=1000, seed=1)
        assert r.ties == 1000 and r.a_better == 0
        assert r.p_value == 1.0
        assert not r.significant()

    def test_dominance(self):
        rng = np.random.default_rng(0)
        junk = [" ".join(rng.permutation(r.split())) + " junk" for r in self.refs]
        r = paired_bootstrap(self.refs, junk, self.refs, samples=1000, seed=1)
        assert r.a_better == 1000
        assert r.p_value < 0.05
        assert r.significant()

    def test_deterministic(self):
        a = [r.replace("is", "was") for r in self.refs]
        b = [r.replace("here", "there") for r in self.refs]
        r1 = paired_bootstrap(a, b, self.refs, seed=7)
        r2 = paired_bootstrap(a, b, self.refs, seed=7)
        assert r1 == r2
        assert r1.a_better + r1.b_better + r1.ties == 1000

    def test_p_formula(self):
        r = BootstrapResult(50.0, 40.0, 1000, a_better=970, b_better=20, ties=10)
        assert r.win_rate == 0.97
        assert r.p_value == pytest.approx(2 * 30 / 1000)

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            paired_bootstrap(["a"], ["a", "b"], ["a"])
        with pytest.raises(ValueError):
            paired_bootstrap(["a"], ["a"], ["a"], samples=10)


class TestReport:
    def test_identity_report(self):
        refs = [P("a b <eol> c <eob>"), P("d <eob> e <eob>")]
        rep = evaluate(refs, refs, function_words=load_function_words("es"))
        d = rep.as_dict()
        assert d["bleu"] == pytest.approx(100.0)
        assert d["sigma"] == pytest.approx(100.0)
        assert d["cpl"] == 100.0
        assert d["eol_coverage"] == 0.0 and d["eob_coverage"] == 0.0
        assert d["counts"] == {"eol_pred": 1, "eol_ref": 1, "eob_pred": 3, "eob_ref": 3}
        assert set(d) == {"bleu", "sigma", "cpl", "eol_coverage", "eob_coverage", "pattern_stats", "counts"}
        json.loads(json.dumps(d))

    def test_missing_kind(self):
        refs = [P("a <eob>")]
        rep = evaluate(refs, refs)
        assert rep.eol_coverage is None
        assert "n/a" in rep.format_text()

    @given(st.lists(strict_sentences(3), min_size=1, max_size=4))
    def test_identity_property(self, sents):
        rep = evaluate(sents, sents)
        assert rep.bleu.score == pytest.approx(100.0)
        assert rep.sigma == pytest.approx(100.0)
