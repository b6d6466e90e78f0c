"""Character-level vocabulary shared by the text encoder and the decoder.

Words are spelled out character by character with ``▁`` between words.
A subtitle break takes the place of the word separator, so at each word
boundary the decoder chooses between ``▁``, ``<eol>`` and ``<eob>``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from ..corpus import BREAKS, EOB, EOL, SegmentedSentence
from ..errors import SubsegError

PAD = "<pad>"
BOS = "<s>"
EOS = "</s>"
BLANK = "<blank>"
UNK = "<unk>"
SEP = "▁"
RESERVED = (PAD, BOS, EOS, BLANK, EOL, EOB)


class UnknownLanguageToken(SubsegError):
    pass


def lang_token(language: str) -> str:
    return language if language.startswith("<lang:") else f"<lang:{language}>"


class Vocabulary:
    def __init__(self, tokens: Sequence[str]):
        self.tokens = tuple(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise SubsegError("vocabulary contains duplicate tokens")
        missing = [t for t in RESERVED if t not in self.index]
        if missing:
            raise SubsegError(f"vocabulary lacks reserved tokens {missing}")
        self.pad, self.bos, self.eos = self.index[PAD], self.index[BOS], self.index[EOS]
        self.blank, self.eol, self.eob = self.index[BLANK], self.index[EOL], self.index[EOB]
        self.sep = self.index.get(SEP)
        self.unk = self.index.get(UNK)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @property
    def languages(self) -> list[str]:
        return [t[6:-1] for t in self.tokens if t.startswith("<lang:")]

    def lang_id(self, language: str) -> int:
        tok = lang_token(language)
        if tok not in self.index:
            raise UnknownLanguageToken(f"{tok} is not in the vocabulary")
        return self.index[tok]

    def non_output_ids(self) -> list[int]:
        """Ids the decoder may never emit after the prefix."""
        ids = [self.pad, self.bos, self.blank]
        ids += [i for t, i in self.index.items() if t.startswith("<lang:")]
        return ids

    def _char(self, c: str) -> int:
        i = self.index.get(c, self.unk)
        if i is None:
            raise SubsegError(f"character {c!r} not in vocabulary and no {UNK}")
        return i

    def encode_words(self, words: Sequence[str]) -> list[int]:
        """Break-free text: characters, ``▁`` between words."""
        out: list[int] = []
        for k, w in enumerate(words):
            if k:
                out.append(self.sep)
            out.extend(self._char(c) for c in w)
        return out

    def encode_segmented(self, s: SegmentedSentence) -> list[int]:
        out: list[int] = []
        pending_sep = False
        for tok in s.tokens:
            if tok in BREAKS:
                out.append(self.index[tok])
                pending_sep = False
            else:
                if pending_sep:
                    out.append(self.sep)
                out.extend(self._char(c) for c in tok)
                pending_sep = True
        return out

    def decode_segmented(self, ids: Iterable[int]) -> SegmentedSentence:
        tokens: list[str] = []
        word: list[str] = []
        skip = {self.pad, self.bos, self.eos, self.blank}
        for i in ids:
            i = int(i)
            if i in skip:
                continue
            tok = self.tokens[i]
            if tok.startswith("<lang:"):
                continue
            if i == self.sep or tok in BREAKS:
                if word:
                    tokens.append("".join(word))
                    word = []
                if tok in BREAKS:
                    tokens.append(tok)
            else:
                word.append(tok)
        if word:
            tokens.append("".join(word))
        return SegmentedSentence(tuple(tokens))


def build_char_vocab(texts: Iterable[str], languages: Iterable[str] = (),
                     extra: Iterable[str] = ()) -> Vocabulary:
    """Reserved tokens, language tokens, ``▁``, ``<unk>`` and every character seen."""
    chars = set()
    for text in texts:
        for tok in text.split():
            if tok not in BREAKS:
                chars.update(tok)
    tokens = list(RESERVED)
    tokens += [lang_token(l) for l in sorted(set(languages))]
    tokens += [SEP, UNK]
    tokens += sorted(chars - set(tokens))
    tokens += [t for t in extra if t not in tokens]
    return Vocabulary(tokens)
