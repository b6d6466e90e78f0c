"""Data model and I/O for break-annotated subtitle text.

Sentences are stored one per line, tokens separated by whitespace, with
the subtitle breaks ``<eol>`` (line break inside a block) and ``<eob>``
(end of block) written inline as standalone tokens.  This module also
reads and writes SRT files and the ``SPFT`` binary feature format.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import EmptyCorpus, SubsegError


class BreakToken(str, Enum):
    EOL = "<eol>"
    EOB = "<eob>"

    def __str__(self) -> str:
        return self.value


EOL = BreakToken.EOL.value
EOB = BreakToken.EOB.value
BREAKS = frozenset((EOL, EOB))


def is_break(token: str) -> bool:
    return token in BREAKS


# --------------------------------------------------------------------------
# errors


class SegmentationError(SubsegError):
    """A break-annotated sentence violates the token grammar."""

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        if index is not None:
            message = f"{message} (token {index})"
        super().__init__(message)


class AdjacentBreaks(SegmentationError):
    pass


class LeadingBreak(SegmentationError):
    pass


class MissingFinalBreak(SegmentationError):
    pass


class OverlongBlock(SegmentationError):
    """Two EOL breaks inside one block, i.e. a block of three lines or more."""


class SrtError(SubsegError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedTimestamp(SrtError):
    pass


class NonMonotonicIndex(SrtError):
    pass


class EmptyCue(SrtError):
    pass


class MalformedCue(SrtError):
    pass


class FeatureFormatError(SubsegError):
    pass


class BadMagic(FeatureFormatError):
    pass


class SizeMismatch(FeatureFormatError):
    pass


class NonFiniteValue(FeatureFormatError):
    pass


# --------------------------------------------------------------------------
# segmented sentences


@dataclass(frozen=True)
class SegmentedSentence:
    """A token sequence with inline break tokens.

    Word tokens are arbitrary non-whitespace strings; breaks are the
    literal strings ``"<eol>"`` and ``"<eob>"``.  Construction does not
    validate; use :func:`parse_segmented` or :meth:`validate`.
    """

    tokens: tuple[str, ...]

    def __post_init__(self):
        if not isinstance(self.tokens, tuple):
            object.__setattr__(self, "tokens", tuple(self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __str__(self) -> str:
        return serialize_segmented(self)

    @property
    def words(self) -> list[str]:
        return strip_breaks(self)

    @property
    def breaks(self) -> list[str]:
        return [t for t in self.tokens if t in BREAKS]

    def count(self, kind: str) -> int:
        kind = str(kind)
        return sum(1 for t in self.tokens if t == kind)

    def validate(self, strict: bool = False) -> "SegmentedSentence":
        _check_tokens(self.tokens, strict)
        return self

    def is_well_formed(self) -> bool:
        try:
            _check_tokens(self.tokens, strict=True)
        except SegmentationError:
            return False
        return True

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "SegmentedSentence":
        """The degenerate segmentation: all words in a single block."""
        return cls(tuple(words) + (EOB,))


def _check_tokens(tokens: Sequence[str], strict: bool) -> None:
    prev_break = False
    prev_kind = None  # kind of the previous break in the sentence
    for i, tok in enumerate(tokens):
        if tok in BREAKS:
            if i == 0:
                raise LeadingBreak("sentence starts with a break", i)
            if prev_break:
                raise AdjacentBreaks("two adjacent breaks", i)
            if strict and tok == EOL and prev_kind == EOL:
                raise OverlongBlock("block with more than two lines", i)
            prev_break = True
            prev_kind = tok
        else:
            prev_break = False
    if strict and (not tokens or tokens[-1] != EOB):
        raise MissingFinalBreak("sentence does not end with <eob>", len(tokens))


def parse_segmented(line: str, strict: bool = False) -> SegmentedSentence:
    """Parse one corpus line into a :class:`SegmentedSentence`.

    Lenient mode accepts a missing final ``<eob>`` (raw subtitle dumps);
    strict mode requires a well-formed sentence: final ``<eob>`` and at
    most two lines per block.
    """
    tokens = tuple(line.split())
    _check_tokens(tokens, strict)
    return SegmentedSentence(tokens)


def serialize_segmented(s: SegmentedSentence) -> str:
    return " ".join(s.tokens)


def strip_breaks(s: SegmentedSentence | Sequence[str]) -> list[str]:
    tokens = s.tokens if isinstance(s, SegmentedSentence) else s
    return [t for t in tokens if t not in BREAKS]


def split_lines(s: SegmentedSentence) -> list[str]:
    """Subtitle lines of ``s``; both break kinds terminate a line."""
    lines: list[str] = []
    current: list[str] = []
    for tok in s.tokens:
        if tok in BREAKS:
            if current:
                lines.append(" ".join(current))
            current = []
        else:
            current.append(tok)
    if current:
        lines.append(" ".join(current))
    return lines


def split_blocks(s: SegmentedSentence) -> list[list[str]]:
    """Blocks of ``s`` as lists of lines; a trailing unterminated block is kept."""
    blocks: list[list[str]] = []
    lines: list[str] = []
    current: list[str] = []
    for tok in s.tokens:
        if tok in BREAKS:
            lines.append(" ".join(current))
            current = []
            if tok == EOB:
                blocks.append(lines)
                lines = []
        else:
            current.append(tok)
    if current:
        lines.append(" ".join(current))
    if lines:
        blocks.append(lines)
    return blocks


def line_length(line: str) -> int:
    """Characters in a line, counted as Unicode code points."""
    return len(line.strip())


# --------------------------------------------------------------------------
# corpora


@dataclass
class Corpus:
    sentences: list[SegmentedSentence]
    language: str = "und"
    name: str = ""

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[SegmentedSentence]:
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]

    def require_nonempty(self) -> None:
        if not self.sentences:
            raise EmptyCorpus(f"corpus {self.name!r} has no sentences")

    def with_sentences(self, sentences: list[SegmentedSentence]) -> "Corpus":
        return Corpus(sentences, language=self.language, name=self.name)

    def lines(self) -> list[str]:
        return [serialize_segmented(s) for s in self.sentences]


def parse_corpus(lines: Iterable[str], strict: bool = False, language: str = "und",
                 name: str = "") -> Corpus:
    sentences = []
    for lineno, line in enumerate(lines, 1):
        try:
            sentences.append(parse_segmented(line, strict=strict))
        except SegmentationError as exc:
            raise type(exc)(f"sentence {lineno}: {exc}") from None
    return Corpus(sentences, language=language, name=name)


def read_corpus(path: str | Path, strict: bool = False, language: str = "und") -> Corpus:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_corpus(text.splitlines(), strict=strict, language=language, name=path.stem)


def format_corpus(corpus: Corpus) -> str:
    return "".join(line + "\n" for line in corpus.lines())


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(format_corpus(corpus), encoding="utf-8")


# --------------------------------------------------------------------------
# SRT


@dataclass(frozen=True)
class SrtCue:
    index: int
    start_ms: int
    end_ms: int
    lines: tuple[str, ...]

    def __post_init__(self):
        if not isinstance(self.lines, tuple):
            object.__setattr__(self, "lines", tuple(self.lines))


_TIMESTAMP = re.compile(
    r"^\s*(\d{2,}):(\d{2}):(\d{2}),(\d{3})\s*-->\s*(\d{2,}):(\d{2}):(\d{2}),(\d{3})\s*$"
)


def _to_ms(h: str, m: str, s: str, ms: str) -> int:
    return ((int(h) * 60 + int(m)) * 60 + int(s)) * 1000 + int(ms)


def format_timestamp(ms: int) -> str:
    h, rem = divmod(ms, 3_600_000)
    m, rem = divmod(rem, 60_000)
    s, ms = divmod(rem, 1000)
    return f"{h:02d}:{m:02d}:{s:02d},{ms:03d}"


def parse_srt(data: bytes | str) -> list[SrtCue]:
    """Parse an SRT file.  A UTF-8 BOM and CRLF line endings are accepted."""
    if isinstance(data, bytes):
        text = data.decode("utf-8-sig")
    else:
        text = data.lstrip("﻿")
    raw_lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")

    cues: list[SrtCue] = []
    i = 0
    n = len(raw_lines)
    while i < n:
        if not raw_lines[i].strip():
            i += 1
            continue
        index_lineno = i + 1
        index_text = raw_lines[i].strip()
        if not index_text.isdigit() or int(index_text) < 1:
            raise MalformedCue(f"expected a positive cue index, got {index_text!r}", index_lineno)
        index = int(index_text)
        if cues and index <= cues[-1].index:
            raise NonMonotonicIndex(
                f"cue index {index} does not follow {cues[-1].index}", index_lineno)
        i += 1
        if i >= n or not raw_lines[i].strip():
            raise MalformedTimestamp("missing timestamp line", i + 1)
        m = _TIMESTAMP.match(raw_lines[i])
        if m is None:
            raise MalformedTimestamp(f"cannot parse {raw_lines[i]!r}", i + 1)
        start = _to_ms(*m.group(1, 2, 3, 4))
        end = _to_ms(*m.group(5, 6, 7, 8))
        if start >= end:
            raise MalformedTimestamp(
                f"cue ends ({format_timestamp(end)}) before it starts ({format_timestamp(start)})",
                i + 1)
        ts_lineno = i + 1
        i += 1
        lines = []
        while i < n and raw_lines[i].strip():
            lines.append(raw_lines[i].strip())
            i += 1
        if not lines:
            raise EmptyCue(f"cue {index} has no text", ts_lineno)
        if len(lines) > 2:
            raise MalformedCue(f"cue {index} has {len(lines)} lines (max 2)", ts_lineno + 3)
        cues.append(SrtCue(index, start, end, tuple(lines)))
    return cues


def emit_srt(cues: Sequence[SrtCue]) -> bytes:
    out = []
    for cue in cues:
        out.append(f"{cue.index}\r\n")
        out.append(f"{format_timestamp(cue.start_ms)} --> {format_timestamp(cue.end_ms)}\r\n")
        for line in cue.lines:
            out.append(line + "\r\n")
        out.append("\r\n")
    return "".join(out).encode("utf-8")


def srt_to_sentence(cues: Sequence[SrtCue]) -> SegmentedSentence:
    """Join cues into one sentence: ``<eol>`` between lines, ``<eob>`` after each cue."""
    if not cues:
        raise EmptyCue("no cues to convert")
    tokens: list[str] = []
    for cue in cues:
        if not cue.lines:
            raise EmptyCue(f"cue {cue.index} has no text")
        for j, line in enumerate(cue.lines):
            words = line.split()
            if not words:
                raise EmptyCue(f"cue {cue.index} has an empty line")
            tokens.extend(words)
            tokens.append(EOL if j < len(cue.lines) - 1 else EOB)
    return SegmentedSentence(tuple(tokens)).validate(strict=True)


# --------------------------------------------------------------------------
# speech features

SPFT_MAGIC = b"SPFT"
_HEADER = struct.Struct("<4sIII")


@dataclass
class FeatureMatrix:
    """Frames x dims speech features, stored as float32."""

    data: np.ndarray
    frame_shift_ms: int = 10

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise SizeMismatch(f"features must be 2-D, got shape {self.data.shape}")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise SizeMismatch(f"features must have at least one frame and dim, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteValue("features contain NaN or infinity")

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (self.frame_shift_ms == other.frame_shift_ms
                and self.data.shape == other.data.shape
                and np.array_equal(self.data, other.data))


def feature_array(features) -> np.ndarray:
    """The frames x dims array behind a ``FeatureMatrix`` or array-like."""
    if isinstance(features, FeatureMatrix):
        return features.data
    return np.asarray(features)


def write_features(m: FeatureMatrix) -> bytes:
    header = _HEADER.pack(SPFT_MAGIC, m.frames, m.dims, m.frame_shift_ms)
    return header + m.data.astype("<f4", copy=False).tobytes(order="C")


def read_features(data: bytes) -> FeatureMatrix:
    if len(data) < _HEADER.size:
        raise SizeMismatch(f"file of {len(data)} bytes is shorter than the SPFT header")
    magic, frames, dims, shift = _HEADER.unpack_from(data)
    if magic != SPFT_MAGIC:
        raise BadMagic(f"expected magic {SPFT_MAGIC!r}, got {magic!r}")
    payload = len(data) - _HEADER.size
    if payload != frames * dims * 4:
        raise SizeMismatch(
            f"header declares {frames}x{dims} values but payload holds {payload / 4:g}")
    values = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(frames, dims)
    if not np.all(np.isfinite(values)):
        bad = int(np.argwhere(~np.isfinite(values))[0][0])
        raise NonFiniteValue(f"non-finite feature value in frame {bad}")
    return FeatureMatrix(values.astype(np.float32), frame_shift_ms=shift)


def load_features(path: str | Path) -> FeatureMatrix:
    return read_features(Path(path).read_bytes())


def save_features(m: FeatureMatrix, path: str | Path) -> None:
    Path(path).write_bytes(write_features(m))


# --------------------------------------------------------------------------
# utterances


@dataclass
class Utterance:
    id: str
    features: FeatureMatrix | None
    source_text: list[str]
    target: SegmentedSentence
    target_language: str = "und"
    feature_file: str | None = field(default=None, compare=False)

    def validate(self) -> None:
        if not self.target.tokens:
            raise SegmentationError(f"utterance {self.id}: empty target")
        self.target.validate(strict=True)


def check_unique_ids(utterances: Iterable[Utterance]) -> None:
    seen = set()
    for u in utterances:
        if u.id in seen:
            raise SubsegError(f"duplicate utterance id {u.id!r}")
        seen.add(u.id)

