"""Pinyin syllable inventory, character-pinyin dictionary, corpus annotation.

Provides the raw material for the parallel corpus: legal syllables, the
character dictionary used to annotate hanzi text, maximal-CJK-run (MIU)
extraction, and the corpus builder that emits aligned pinyin/hanzi word
sequences.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import AnnotationError, ParseError

log = logging.getLogger(__name__)

_SYLLABLE_RE = re.compile(r"^[a-z]{1,6}$")

# CJK Unified Ideographs; Extension A only when explicitly enabled.
_CJK_BASE = (0x4E00, 0x9FFF)
_CJK_EXT_A = (0x3400, 0x4DBF)


def is_cjk(ch: str, include_ext_a: bool = False) -> bool:
    cp = ord(ch)
    if _CJK_BASE[0] <= cp <= _CJK_BASE[1]:
        return True
    return include_ext_a and _CJK_EXT_A[0] <= cp <= _CJK_EXT_A[1]


def validate_syllable(text: str) -> str:
    if not _SYLLABLE_RE.match(text):
        raise ValueError(f"illegal syllable {text!r}: expected 1-6 letters a-z")
    return text


def load_syllable_inventory(path) -> set[str]:
    """Read one syllable per line; duplicates collapse, malformed lines raise."""
    inventory = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            if not _SYLLABLE_RE.match(text):
                raise ParseError(f"illegal syllable {text!r}", path=str(path), line=lineno)
            inventory.add(text)
    log.info("loaded %d syllables from %s", len(inventory), path)
    return inventory


def load_char_pinyin_dict(path, inventory: set[str] | None = None) -> dict[str, list[str]]:
    """Read the char->pronunciations TSV, most frequent pronunciation first.

    Rows are ``<character>\\t<syllable>[ <syllable>...]``. When an inventory
    is given every syllable must be a member of it.
    """
    table: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected <char>TAB<syllables>", path=str(path), line=lineno)
            char, syls = parts[0], parts[1].split()
            if len(char) != 1 or not is_cjk(char, include_ext_a=True):
                raise ParseError(f"key {char!r} is not a single CJK character", path=str(path), line=lineno)
            if not syls:
                raise ParseError("empty pronunciation list", path=str(path), line=lineno)
            for s in syls:
                if not _SYLLABLE_RE.match(s):
                    raise ParseError(f"illegal syllable {s!r}", path=str(path), line=lineno)
                if inventory is not None and s not in inventory:
                    raise ParseError(f"syllable {s!r} not in inventory", path=str(path), line=lineno)
            table[char] = syls
    log.info("loaded %d characters from %s", len(table), path)
    return table


def reverse_char_dict(cpdict: dict[str, list[str]]) -> dict[str, list[str]]:
    """syllable -> characters readable with it, dictionary order preserved."""
    rev: dict[str, list[str]] = {}
    for char, syls in cpdict.items():
        for s in syls:
            rev.setdefault(s, []).append(char)
    return rev


@dataclass(frozen=True)
class MIU:
    """Maximal uninterrupted CJK run inside one line."""

    chars: str
    start: int
    end: int  # exclusive offset into the source line


def split_mius(line: str, include_ext_a: bool = False) -> list[MIU]:
    """Extract maximal CJK runs, left to right, tiling all CJK positions."""
    mius = []
    start = None
    for i, ch in enumerate(line):
        if is_cjk(ch, include_ext_a):
            if start is None:
                start = i
        elif start is not None:
            mius.append(MIU(line[start:i], start, i))
            start = None
    if start is not None:
        mius.append(MIU(line[start:], start, len(line)))
    return mius


def annotate_pinyin(hanzi_line: str, cpdict: dict[str, list[str]],
                    include_ext_a: bool = False) -> list[str]:
    """One syllable per CJK character, first-listed pronunciation for polyphones.

    Non-CJK characters are skipped (they mark MIU boundaries). Unknown CJK
    characters raise AnnotationError with the character and offset.
    """
    out = []
    for i, ch in enumerate(hanzi_line):
        if not is_cjk(ch, include_ext_a):
            continue
        syls = cpdict.get(ch)
        if not syls:
            raise AnnotationError(ch, i)
        out.append(syls[0])
    return out


@dataclass
class ParallelSentence:
    """Aligned pinyin/hanzi word sequences sharing one segmentation."""

    pinyin_words: list[tuple[str, ...]]
    hanzi_words: list[str]

    def __post_init__(self):
        if len(self.pinyin_words) != len(self.hanzi_words):
            raise ValueError("pinyin/hanzi word counts differ")
        for py, hz in zip(self.pinyin_words, self.hanzi_words):
            if len(py) != len(hz):
                raise ValueError(f"word {hz!r} has {len(hz)} chars but {len(py)} syllables")

    @property
    def syllables(self) -> list[str]:
        return [s for w in self.pinyin_words for s in w]

    @property
    def hanzi(self) -> str:
        return "".join(self.hanzi_words)

    def to_tsv(self) -> str:
        left = " ".join("'".join(w) for w in self.pinyin_words)
        return f"{left}\t{' '.join(self.hanzi_words)}"

    @classmethod
    def from_tsv(cls, line: str) -> "ParallelSentence":
        left, _, right = line.rstrip("\n").partition("\t")
        if not right:
            raise ValueError(f"expected TAB-separated pair, got {line!r}")
        pinyin_words = [tuple(w.split("'")) for w in left.split(" ") if w]
        hanzi_words = [w for w in right.split(" ") if w]
        return cls(pinyin_words, hanzi_words)


@dataclass
class CorpusStats:
    lines: int = 0
    sentences: int = 0
    skipped: int = 0
    words: int = 0


def build_parallel_corpus(hanzi_corpus, cpdict, vocab=None, max_words: int = 60,
                          stats: CorpusStats | None = None,
                          include_ext_a: bool = False) -> Iterator[ParallelSentence]:
    """Stream aligned sentences from a one-sentence-per-line hanzi corpus.

    The hanzi side is segmented by maximum matching against ``vocab`` (falling
    back to single characters); the pinyin side follows the same segmentation.
    Lines whose annotation fails are skipped with a warning. Lines longer than
    ``max_words`` words are split at MIU boundaries.
    """
    if stats is None:
        stats = CorpusStats()
    if isinstance(hanzi_corpus, (str, bytes)) or hasattr(hanzi_corpus, "__fspath__"):
        fh = open(hanzi_corpus, encoding="utf-8")
        close = True
    else:
        fh, close = iter(hanzi_corpus), False
    try:
        for lineno, raw in enumerate(fh, start=1):
            stats.lines += 1
            line = raw.rstrip("\n")
            try:
                for sentence in parallel_from_line(line, cpdict, vocab,
                                                   max_words=max_words,
                                                   include_ext_a=include_ext_a):
                    stats.sentences += 1
                    stats.words += len(sentence.hanzi_words)
                    yield sentence
            except AnnotationError as exc:
                stats.skipped += 1
                log.warning("line %d skipped: %s", lineno, exc)
    finally:
        if close:
            fh.close()


def parallel_from_line(line, cpdict, vocab=None, max_words: int = 60,
                       include_ext_a: bool = False) -> list[ParallelSentence]:
    """Segment the CJK runs of one line into aligned word sequences."""
    mius = split_mius(line, include_ext_a)
    if not mius:
        return []
    chunks = []  # one (pinyin_words, hanzi_words) per MIU
    for miu in mius:
        syls = annotate_pinyin(miu.chars, cpdict, include_ext_a)
        hanzi_words = _segment_hanzi(miu.chars, vocab)
        pinyin_words = []
        pos = 0
        for w in hanzi_words:
            pinyin_words.append(tuple(syls[pos:pos + len(w)]))
            pos += len(w)
        chunks.append((pinyin_words, hanzi_words))

    sentences = []
    cur_py: list[tuple[str, ...]] = []
    cur_hz: list[str] = []
    for pinyin_words, hanzi_words in chunks:
        if cur_hz and len(cur_hz) + len(hanzi_words) > max_words:
            sentences.append(ParallelSentence(cur_py, cur_hz))
            cur_py, cur_hz = [], []
        cur_py.extend(pinyin_words)
        cur_hz.extend(hanzi_words)
    if cur_hz:
        sentences.append(ParallelSentence(cur_py, cur_hz))
    return sentences


def _segment_hanzi(chars: str, vocab) -> list[str]:
    if vocab is None:
        return list(chars)
    return vocab.segment_hanzi(chars)


def miu_items(corpus_lines: Iterable[str], cpdict,
              include_ext_a: bool = False) -> Iterator[tuple[list[str], str]]:
    """Yield (syllables, gold chars) per MIU; annotation failures are skipped."""
    for line in corpus_lines:
        for miu in split_mius(line.rstrip("\n"), include_ext_a):
            try:
                yield annotate_pinyin(miu.chars, cpdict, include_ext_a), miu.chars
            except AnnotationError as exc:
                log.warning("miu %r skipped: %s", miu.chars, exc)
