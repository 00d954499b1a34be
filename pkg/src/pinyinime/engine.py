"""The IME session loop: convert, show candidates, learn from the choice.

Each accepted choice drives the vocabulary update rule and buffers a
training instance; every ``train_every`` instances the engine retrains a
copy of the model on the buffer and swaps it in atomically, so conversions
keep running against a consistent snapshot.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass, asdict

import numpy as np

from . import autograd as ag
from .errors import ContractError, SegmentationError
from .model import Candidate, P2CModel, load_checkpoint, save_checkpoint
from .pinyin import ParallelSentence
from .vocab import Trie, UpdateReport, Vocabulary

log = logging.getLogger(__name__)


@dataclass
class OnlineConfig:
    train_every: int = 64
    online_batch: int = 1
    online_epochs: int = 1     # set 25 to replay the buffer the full-study way
    online_lr: float = 0.5
    freeze_encoder: bool = False
    page_size: int = 5


@dataclass
class SessionTurn:
    turn_id: int
    pinyin: list[str]
    shown: list[Candidate]
    choice: str | None = None
    update: UpdateReport | None = None

    def rank_of(self, text: str) -> int:
        """1-based rank of a candidate text, or -1 when not shown."""
        for i, c in enumerate(self.shown):
            if c.text == text:
                return i + 1
        return -1

    def page(self, index: int, page_size: int = 5) -> list[Candidate]:
        # the candidate at page p, slot i has global rank p*page_size + i
        return self.shown[index * page_size:(index + 1) * page_size]


def copy_model(model: P2CModel) -> P2CModel:
    clone = P2CModel(model.cfg, model.src_bank.units, model.tgt_bank.units)
    for bank, src in ((clone.src_bank, model.src_bank), (clone.tgt_bank, model.tgt_bank)):
        bank.words = list(src.words)
        bank.word_index = dict(src.word_index)
    dst = clone.parameters()
    for name, p in model.parameters().items():
        dst[name].data = np.array(p.data, copy=True)
    return clone


class OnlineEngine:
    """One user's converter: shared model snapshot, serialized updates."""

    def __init__(self, model: P2CModel, vocab: Vocabulary, inventory,
                 cfg: OnlineConfig | None = None, online: bool = True):
        self.model = model
        self.vocab = vocab
        self.cfg = cfg or OnlineConfig()
        self.online = online
        self.inventory = set(inventory)
        self.letter_trie = Trie()
        for s in sorted(self.inventory):
            self.letter_trie.insert(s, s)
        self.buffer: list[ParallelSentence] = []
        self.turns = 0
        self.last_flush_turn = -1
        self.flushes = 0
        self._lock = threading.Lock()

    # -- input handling ------------------------------------------------------

    def segment_letters(self, text: str) -> list[str]:
        """Greedy maximum matching of raw letters over the syllable inventory."""
        out = []
        i = 0
        while i < len(text):
            n = self.letter_trie.longest_match(text, i)
            if n == 0:
                raise SegmentationError(text, i)
            out.append(text[i:i + n])
            i += n
        return out

    def to_syllables(self, pinyin) -> list[str]:
        if isinstance(pinyin, str):
            if "'" in pinyin:
                sylls = [s for s in pinyin.split("'") if s]
            else:
                return self.segment_letters(pinyin)
        else:
            sylls = list(pinyin)
        for i, s in enumerate(sylls):
            if s not in self.inventory:
                raise SegmentationError("'".join(sylls), i)
        if not sylls:
            raise SegmentationError("", 0)
        return sylls

    # -- the conversion loop ----------------------------------------------------

    def convert(self, pinyin) -> SessionTurn:
        """Beam-search the input; raw letters are segmented first."""
        syllables = self.to_syllables(pinyin)
        model = self.model  # snapshot for the whole call
        shown = model.beam_search(syllables, self.vocab)
        self.turns += 1
        return SessionTurn(turn_id=self.turns, pinyin=syllables, shown=shown)

    def submit_choice(self, turn: SessionTurn, chosen: str) -> SessionTurn:
        """Record the user's choice; learn from it when online."""
        if len(chosen) != len(turn.pinyin):
            raise ContractError(
                f"choice {chosen!r} has {len(chosen)} chars for {len(turn.pinyin)} syllables")
        if not turn.shown:
            raise ContractError("turn has no candidates")
        with self._lock:
            turn.choice = chosen
            if not self.online:
                turn.update = UpdateReport(turn=turn.turn_id)
                return turn
            turn.update = self.vocab.update(turn.pinyin, turn.shown[0].text,
                                            chosen, turn=turn.turn_id)
            hanzi_words = self.vocab.segment_hanzi(chosen)
            pinyin_words = []
            pos = 0
            for w in hanzi_words:
                pinyin_words.append(tuple(turn.pinyin[pos:pos + len(w)]))
                pos += len(w)
            self.buffer.append(ParallelSentence(pinyin_words, hanzi_words))
            if len(self.buffer) >= self.cfg.train_every:
                self._flush(turn.turn_id)
        return turn

    def _flush(self, turn_id: int):
        trained = copy_model(self.model)
        params = trained.parameters()
        if self.cfg.freeze_encoder:
            params = {k: v for k, v in params.items() if not k.startswith("enc.")}
        plist = list(params.values())
        for _ in range(self.cfg.online_epochs):
            for start in range(0, len(self.buffer), self.cfg.online_batch):
                batch = self.buffer[start:start + self.cfg.online_batch]
                with ag.Tape() as tape:
                    loss, tokens = None, 0
                    for ps in batch:
                        sl, n = trained.sentence_loss(ps, self.vocab, train=True)
                        loss = sl if loss is None else ag.add(loss, sl)
                        tokens += n
                    tape.backward(ag.scale(loss, 1.0 / tokens))
                ag.sgd_step(plist, self.cfg.online_lr, trained.cfg.clip_norm)
        self.model = trained  # atomic snapshot swap
        self.buffer = []
        self.flushes += 1
        self.last_flush_turn = turn_id
        log.info("online flush #%d at turn %d", self.flushes, turn_id)

    def replay_simulated_user(self, stream) -> list[dict]:
        """Drive the engine with gold references standing in for the user."""
        rows = []
        for sentence in stream:
            try:
                turn = self.convert(sentence.syllables)
                gold = sentence.hanzi
                self.submit_choice(turn, gold)
            except (SegmentationError, ContractError) as exc:
                log.warning("replay item %r skipped: %s", sentence.hanzi, exc)
                continue
            rows.append({
                "turn_id": turn.turn_id,
                "pinyin": "'".join(turn.pinyin),
                "top1": turn.shown[0].text if turn.shown else "",
                "chosen": gold,
                "rank_of_chosen": turn.rank_of(gold),
                "added_words": "|".join(e.hanzi for e in turn.update.added),
                "vocab_size": len(self.vocab),
            })
        return rows

    # -- stats & persistence --------------------------------------------------

    def stats(self) -> dict:
        return {
            "vocab_size": len(self.vocab),
            "model_config": asdict(self.model.cfg),
            "turns": self.turns,
            "last_flush_turn": self.last_flush_turn,
        }

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        save_checkpoint(self.model, os.path.join(directory, "model.ckpt"))
        self.vocab.save(os.path.join(directory, "vocab.tsv"))
        state = {
            "turns": self.turns,
            "last_flush_turn": self.last_flush_turn,
            "flushes": self.flushes,
            "online": self.online,
            "config": asdict(self.cfg),
            "buffer": [ps.to_tsv() for ps in self.buffer],
        }
        with open(os.path.join(directory, "engine.json"), "w", encoding="utf-8") as fh:
            json.dump(state, fh, ensure_ascii=False)

    @classmethod
    def load(cls, directory, inventory, fallback) -> "OnlineEngine":
        model = load_checkpoint(os.path.join(directory, "model.ckpt"))
        vocab = Vocabulary.load(os.path.join(directory, "vocab.tsv"), fallback=fallback)
        with open(os.path.join(directory, "engine.json"), encoding="utf-8") as fh:
            state = json.load(fh)
        engine = cls(model, vocab, inventory, cfg=OnlineConfig(**state["config"]),
                     online=state["online"])
        engine.turns = state["turns"]
        engine.last_flush_turn = state["last_flush_turn"]
        engine.flushes = state["flushes"]
        engine.buffer = [ParallelSentence.from_tsv(line) for line in state["buffer"]]
        return engine
