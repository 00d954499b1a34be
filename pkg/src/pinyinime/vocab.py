"""Adaptive bilingual vocabulary: dual tries, maximum matching, online updates.

The vocabulary holds (pinyin word, hanzi word) pairs and only ever grows.
New words enter through the one-turn update rule: when the user's choice
disagrees with the shown top-1, every character window (length 2..6) whose
first and last characters both differ is added as a new pair, longest first,
skipping windows already covered by a longer addition in the same turn.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import ContractError, ParseError

log = logging.getLogger(__name__)

MAX_ONLINE_WORD = 6
MIN_ONLINE_WORD = 2


@dataclass
class BilingualEntry:
    pinyin: tuple[str, ...]
    hanzi: str
    freq: int = 0
    born: int = 0

    def __post_init__(self):
        self.pinyin = tuple(self.pinyin)
        if len(self.pinyin) != len(self.hanzi):
            raise ValueError(f"{self.hanzi!r}: {len(self.hanzi)} chars vs {len(self.pinyin)} syllables")
        if not self.hanzi:
            raise ValueError("empty entry")

    @property
    def key(self) -> tuple[tuple[str, ...], str]:
        return (self.pinyin, self.hanzi)

    @property
    def pinyin_text(self) -> str:
        return "'".join(self.pinyin)


@dataclass
class UpdateReport:
    added: list[BilingualEntry] = field(default_factory=list)
    examined_ngrams: int = 0
    turn: int = 0


class Trie:
    """Prefix tree over hashable unit sequences; leaves carry value lists."""

    __slots__ = ("children", "values")

    def __init__(self):
        self.children: dict = {}
        self.values: list = []

    def insert(self, key, value):
        node = self
        for unit in key:
            node = node.children.setdefault(unit, Trie())
        node.values.append(value)

    def longest_match(self, seq, start: int = 0) -> int:
        """Length of the longest key that prefixes seq[start:], 0 if none."""
        node, best, depth = self, 0, 0
        for i in range(start, len(seq)):
            node = node.children.get(seq[i])
            if node is None:
                break
            depth += 1
            if node.values:
                best = depth
        return best

    def prefix_values(self, seq, start: int = 0):
        """Yield (match_length, values) for every key prefixing seq[start:]."""
        node, depth = self, 0
        for i in range(start, len(seq)):
            node = node.children.get(seq[i])
            if node is None:
                return
            depth += 1
            if node.values:
                yield depth, node.values


def max_match_segment(seq, trie: Trie) -> list:
    """Greedy longest-match segmentation with single-unit fallback.

    Output words concatenate to the input exactly; every chosen word is the
    longest trie match at its position (or one unit when nothing matches).
    """
    out = []
    i = 0
    while i < len(seq):
        n = trie.longest_match(seq, i) or 1
        out.append(seq[i:i + n])
        i += n
    return out


class Vocabulary:
    """The mutable open vocabulary V with mutually consistent dual tries.

    ``fallback`` maps a syllable to the dictionary characters readable with
    it; these characters back candidate generation for syllables no stored
    word covers, so decoding always has at least one path.
    """

    def __init__(self, entries=(), fallback: dict[str, list[str]] | None = None):
        self._entries: dict[tuple, BilingualEntry] = {}
        self.pinyin_trie = Trie()
        self.hanzi_trie = Trie()
        self.fallback = fallback or {}
        for e in entries:
            self.add(e)

    def __len__(self):
        return len(self._entries)

    def __contains__(self, key) -> bool:
        if isinstance(key, BilingualEntry):
            key = key.key
        return key in self._entries

    def entries(self) -> list[BilingualEntry]:
        return sorted(self._entries.values(), key=lambda e: (e.hanzi, e.pinyin))

    def get(self, pinyin, hanzi) -> BilingualEntry | None:
        return self._entries.get((tuple(pinyin), hanzi))

    def add(self, entry: BilingualEntry) -> bool:
        """Insert a new pair; returns False when it is already stored."""
        if entry.key in self._entries:
            return False
        self._entries[entry.key] = entry
        self.pinyin_trie.insert(entry.pinyin, entry)
        self.hanzi_trie.insert(entry.hanzi, entry)
        return True

    def add_count(self, pinyin, hanzi, n: int = 1, born: int = 0) -> BilingualEntry:
        """Add or bump a pair by n occurrences (corpus ingestion path)."""
        e = self.get(pinyin, hanzi)
        if e is None:
            e = BilingualEntry(tuple(pinyin), hanzi, freq=0, born=born)
            self.add(e)
        e.freq += n
        return e

    def hanzi_words(self) -> dict[str, int]:
        """Distinct hanzi words with summed frequencies."""
        words: dict[str, int] = {}
        for e in self._entries.values():
            words[e.hanzi] = words.get(e.hanzi, 0) + e.freq
        return words

    def pinyin_words(self) -> dict[tuple[str, ...], int]:
        words: dict[tuple, int] = {}
        for e in self._entries.values():
            words[e.pinyin] = words.get(e.pinyin, 0) + e.freq
        return words

    def segment_hanzi(self, chars: str) -> list[str]:
        return max_match_segment(chars, self.hanzi_trie)

    def segment_pinyin(self, syllables) -> list[tuple[str, ...]]:
        return [tuple(w) for w in max_match_segment(tuple(syllables), self.pinyin_trie)]

    # -- candidate generation ------------------------------------------------

    def candidates_for_prefix(self, remaining) -> list[BilingualEntry]:
        """Entries whose pinyin prefixes ``remaining``, best matches first.

        Sorted by (length desc, freq desc, hanzi); dictionary fallback
        characters for the first syllable are appended after all stored
        entries, so the list is never empty for an annotatable syllable.
        """
        remaining = tuple(remaining)
        if not remaining:
            raise ContractError("candidates_for_prefix: empty remaining input")
        matches = []
        for depth, values in self.pinyin_trie.prefix_values(remaining):
            matches.extend(values)
        matches.sort(key=lambda e: (-len(e.hanzi), -e.freq, e.hanzi))
        seen = {e.hanzi for e in matches if len(e.hanzi) == 1}
        for ch in self.fallback.get(remaining[0], ()):
            if ch not in seen:
                matches.append(BilingualEntry((remaining[0],), ch, freq=0, born=-1))
                seen.add(ch)
        return matches

    # -- one-turn online update ----------------------------------------------

    def update(self, Py, Cm: str, Cu: str, turn: int = 0) -> UpdateReport:
        """Learn from one user interaction; see the module docstring.

        Frequencies of stored words appearing in the (pre-update) maximum
        matching segmentation of Cu are bumped by one, so repeated choices
        reorder candidate lists even when nothing new is added.
        """
        Py = tuple(Py)
        if not (len(Py) == len(Cm) == len(Cu)):
            raise ContractError(
                f"update: aligned lengths required, got {len(Py)}/{len(Cm)}/{len(Cu)}")
        report = UpdateReport(turn=turn)

        pos = 0
        for word in self.segment_hanzi(Cu):
            entry = self.get(Py[pos:pos + len(word)], word)
            if entry is not None:
                entry.freq += 1
            pos += len(word)

        mismatch = {i for i, (a, b) in enumerate(zip(Cu, Cm)) if a != b}
        if not mismatch:
            return report

        # spans already explained by a word added this turn or stored earlier;
        # their sub-windows are fragments, not new words (keeps re-running the
        # same correction a no-op)
        covered: list[tuple[int, int]] = []
        for n in range(min(MAX_ONLINE_WORD, len(Cu)), MIN_ONLINE_WORD - 1, -1):
            for i in range(0, len(Cu) - n + 1):
                report.examined_ngrams += 1
                j = i + n
                if i not in mismatch or (j - 1) not in mismatch:
                    continue
                if any(i >= s and j <= e for s, e in covered):
                    continue
                entry = BilingualEntry(Py[i:j], Cu[i:j], freq=1, born=turn)
                if self.add(entry):
                    report.added.append(entry)
                covered.append((i, j))
        return report

    # -- persistence -----------------------------------------------------------

    def save(self, path):
        """TSV rows ``pinyin<TAB>hanzi<TAB>freq<TAB>born``, sorted by hanzi."""
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.entries():
                fh.write(f"{e.pinyin_text}\t{e.hanzi}\t{e.freq}\t{e.born}\n")

    @classmethod
    def load(cls, path, fallback=None) -> "Vocabulary":
        vocab = cls(fallback=fallback)
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 4:
                    raise ParseError("expected 4 tab-separated fields", path=str(path), line=lineno)
                pinyin = tuple(parts[0].split("'"))
                try:
                    entry = BilingualEntry(pinyin, parts[1], freq=int(parts[2]), born=int(parts[3]))
                except ValueError as exc:
                    raise ParseError(str(exc), path=str(path), line=lineno) from None
                if not vocab.add(entry):
                    raise ParseError(f"duplicate entry {parts[1]!r}", path=str(path), line=lineno)
        return vocab

    def clone(self) -> "Vocabulary":
        return Vocabulary(
            (BilingualEntry(e.pinyin, e.hanzi, e.freq, e.born) for e in self._entries.values()),
            fallback=self.fallback,
        )

    def evict(self, max_size: int) -> list[BilingualEntry]:
        """Optional size cap: drop the lowest-(freq, recency) entries.

        Never called by the update path (|V| stays monotone during normal
        operation); an operator invokes this explicitly to bound memory.
        Returns the evicted entries, oldest-and-rarest first.
        """
        if max_size < 0:
            raise ContractError(f"evict: negative max_size {max_size}")
        if len(self._entries) <= max_size:
            return []
        ranked = sorted(self._entries.values(), key=lambda e: (e.freq, e.born))
        evicted = ranked[:len(ranked) - max_size]
        self._entries = {e.key: e for e in ranked[len(evicted):]}
        self.pinyin_trie = Trie()
        self.hanzi_trie = Trie()
        for e in self._entries.values():
            self.pinyin_trie.insert(e.pinyin, e)
            self.hanzi_trie.insert(e.hanzi, e)
        return evicted
