import sys

import pytest
from hypothesis import settings
from hypothesis import strategies as st

from subseg import kernels
from subseg.corpus import EOB, EOL, SegmentedSentence

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

word = st.text(alphabet="abcdefghijklmnopqrstuvwxyzáé.,?!'", min_size=1, max_size=9).filter(
    lambda w: w not in (EOL, EOB))
words = st.lists(word, min_size=1, max_size=25)


@st.composite
def strict_sentences(draw, max_blocks=5):
    """Well-formed sentences: blocks of one or two lines, final <eob>."""
    tokens = []
    for _ in range(draw(st.integers(1, max_blocks))):
        n_lines = draw(st.integers(1, 2))
        for j in range(n_lines):
            tokens += draw(st.lists(word, min_size=1, max_size=4))
            tokens.append(EOL if j < n_lines - 1 else EOB)
    return SegmentedSentence(tuple(tokens))


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request):
    return kernels.available_backends()[request.param]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(results):
        terminalreporter.write_line(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})")
