"""Neural pinyin-to-character converter.

Words on both sides are represented by character-enhanced embeddings: a
word embedding (kept only for the most frequent words) multiplied
elementwise with a bi-GRU composition of the word's unit embeddings
(syllables on the source side, hanzi characters on the target side).
Words without a word-embedding row fall back to the composed form alone,
which is what makes words learned online scoreable immediately.

The encoder is a stacked bi-LSTM over source words; the decoder is a
stacked LSTM with global attention whose output layer scores only the
words of a per-sentence target vocabulary.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass, asdict

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import CheckpointError, ContractError, NumericError
from .pinyin import ParallelSentence
from .vocab import Vocabulary

log = logging.getLogger(__name__)

CKPT_MAGIC = b"OIME1"
_CKPT_DTYPES = {1: np.float32, 2: np.float64}


@dataclass
class ModelConfig:
    layers: int = 3
    hidden: int = 500
    embed: int = 200
    composer_hidden: int = 0      # 0 -> embed // 2
    dropout: float = 0.3
    filter_ratio: float = 0.9
    common_words: int = 50        # size of the always-active frequent-word set
    beam: int = 10
    topk: int = 10
    lr: float = 1.0
    lr_halve_after: int = 9
    clip_norm: float = 5.0
    epochs: int = 13
    batch: int = 32
    seed: int = 1
    dtype: str = "float32"

    def __post_init__(self):
        if self.composer_hidden <= 0:
            self.composer_hidden = max(1, self.embed // 2)


def desk_config(**overrides) -> ModelConfig:
    """Small profile for laptop-scale experiments and the test fixtures."""
    base = dict(layers=3, hidden=64, embed=64, dropout=0.0, epochs=50,
                batch=16, lr=1.0, lr_halve_after=30, common_words=20,
                beam=5, topk=10)
    base.update(overrides)
    return ModelConfig(**base)


def lr_at_epoch(base_lr: float, epoch: int, halve_after: int) -> float:
    """Halve the rate every epoch past ``halve_after`` (1-based epochs)."""
    return base_lr * 0.5 ** max(0, epoch - halve_after)


# -- embedding banks -----------------------------------------------------------


class EmbeddingBank:
    """Unit embeddings + bi-GRU composer + frequent-word embedding table."""

    def __init__(self, units, unitize, cfg: ModelConfig, rng, with_bias=False):
        self.unitize = unitize
        self.units = list(units)
        self.unit_index = {u: i for i, u in enumerate(self.units)}
        self.filter_ratio = cfg.filter_ratio
        self.embed = cfg.embed
        ch = cfg.composer_hidden
        dt = np.dtype(cfg.dtype)
        self.dtype = dt
        # last row of the unit table is the shared UNK unit
        self.unit_table = ag.uniform_param(len(self.units) + 1, cfg.embed, rng, dtype=dt)
        self.gru = {}
        for d in ("fwd", "bwd"):
            self.gru[d] = {
                "Wxg": ag.uniform_param(cfg.embed, 2 * ch, rng, dtype=dt),
                "Whg": ag.uniform_param(ch, 2 * ch, rng, dtype=dt),
                "bg": ag.uniform_param(1, 2 * ch, rng, scale=0.0, dtype=dt),
                "Wxh": ag.uniform_param(cfg.embed, ch, rng, dtype=dt),
                "Whh": ag.uniform_param(ch, ch, rng, dtype=dt),
                "bh": ag.uniform_param(1, ch, rng, scale=0.0, dtype=dt),
            }
        self.proj_w = ag.uniform_param(2 * ch, cfg.embed, rng, dtype=dt)
        self.proj_b = ag.uniform_param(1, cfg.embed, rng, scale=0.0, dtype=dt)
        self.words: list[str] = []
        self.word_index: dict[str, int] = {}
        self.word_table = Tensor(np.zeros((0, cfg.embed)), requires_grad=True, dtype=dt)
        self.with_bias = with_bias
        self.bias_table = Tensor(np.zeros((0, 1)), requires_grad=True, dtype=dt)
        self._rng = rng

    # word-table membership -----------------------------------------------

    def refresh_words(self, word_freqs: dict, rng=None):
        """Rebuild the frequent-word set as the top filter_ratio fraction.

        Rows of words that stay frequent are preserved; new rows are
        randomly initialized. Never called mid-epoch or mid-session so
        word ids stay stable while a tape might reference them.
        """
        rng = rng or self._rng
        keep = math.ceil(self.filter_ratio * len(word_freqs))
        ranked = sorted(word_freqs.items(), key=lambda kv: (-kv[1], kv[0]))[:keep]
        new_words = [self._word_key(w) for w, _ in ranked]
        old_rows = self.word_table.data
        old_bias = self.bias_table.data
        table = np.empty((len(new_words), self.embed), dtype=self.dtype)
        bias = np.zeros((len(new_words), 1), dtype=self.dtype)
        for i, w in enumerate(new_words):
            j = self.word_index.get(w)
            if j is not None:
                table[i] = old_rows[j]
                bias[i] = old_bias[j] if self.with_bias else 0.0
            else:
                # near the multiplicative identity: the enhanced embedding
                # starts as the composed form, and words that later enter the
                # vocabulary online (composed form only) share its scale
                table[i] = 1.0 + rng.uniform(-0.08, 0.08, size=self.embed)
        self.words = new_words
        self.word_index = {w: i for i, w in enumerate(new_words)}
        self.word_table = Tensor(table, requires_grad=True, dtype=self.dtype)
        self.bias_table = Tensor(bias, requires_grad=True, dtype=self.dtype)

    @staticmethod
    def _word_key(word) -> str:
        return "'".join(word) if isinstance(word, tuple) else word

    def seed_word_vectors(self, vectors: dict[str, np.ndarray]):
        """Overwrite word-table rows with pre-trained vectors where available."""
        hits = 0
        for w, vec in vectors.items():
            i = self.word_index.get(w)
            if i is not None:
                self.word_table.data[i] = np.asarray(vec, dtype=self.dtype)
                hits += 1
        return hits

    # composition ----------------------------------------------------------

    def _unit_ids(self, word) -> list[int]:
        unk = len(self.units)
        return [self.unit_index.get(u, unk) for u in self.unitize(word)]

    def ce_matrix(self, words) -> Tensor:
        """(m, ED) bi-GRU composition of each word's units, in word order."""
        if not words:
            raise ContractError("ce_matrix: empty word list")
        groups: dict[int, list[int]] = {}
        ids = [self._unit_ids(w) for w in words]
        for pos, seq in enumerate(ids):
            groups.setdefault(len(seq), []).append(pos)
        pieces, perm = [], [0] * len(words)
        row = 0
        for length in sorted(groups):
            members = groups[length]
            idmat = np.array([ids[pos] for pos in members], dtype=np.intp)
            fwd = self._gru_pass(idmat, self.gru["fwd"])
            bwd = self._gru_pass(idmat[:, ::-1], self.gru["bwd"])
            h = ag.concat([fwd, bwd], axis=1)
            pieces.append(h)
            for pos in members:
                perm[pos] = row
                row += 1
        stacked = pieces[0] if len(pieces) == 1 else ag.concat(pieces, axis=0)
        ordered = ag.embedding_gather(stacked, perm)
        return ag.add(ag.matmul(ordered, self.proj_w), self.proj_b)

    def _gru_pass(self, idmat, p) -> Tensor:
        n, length = idmat.shape
        ch = p["Whh"].shape[0]
        h = Tensor(np.zeros((n, ch)), dtype=self.dtype)
        one = Tensor(np.ones((n, ch)), dtype=self.dtype)
        for t in range(length):
            x = ag.embedding_gather(self.unit_table, idmat[:, t])
            gates = ag.sigmoid(ag.add(ag.add(ag.matmul(x, p["Wxg"]),
                                             ag.matmul(h, p["Whg"])), p["bg"]))
            z = ag.slice_cols(gates, 0, ch)
            r = ag.slice_cols(gates, ch, 2 * ch)
            hbar = ag.tanh(ag.add(ag.add(ag.matmul(x, p["Wxh"]),
                                         ag.matmul(ag.mul(r, h), p["Whh"])), p["bh"]))
            omz = ag.add(one, ag.scale(z, -1.0))
            h = ag.add(ag.mul(omz, h), ag.mul(z, hbar))
        return h

    def cwe_matrix(self, words) -> Tensor:
        """(m, ED) enhanced embeddings: WE(w) * CE(w), or CE(w) alone."""
        ce = self.ce_matrix(words)
        ones = Tensor(np.ones((1, self.embed)), dtype=self.dtype)
        aug = ag.concat([self.word_table, ones], axis=0)
        rows = [self.word_index.get(self._word_key(w), len(self.words)) for w in words]
        we = ag.embedding_gather(aug, rows)
        return ag.mul(we, ce)

    def bias_row(self, words) -> Tensor:
        """(1, m) per-word output bias; zero for words outside the table."""
        zero = Tensor(np.zeros((1, 1)), dtype=self.dtype)
        aug = ag.concat([self.bias_table, zero], axis=0)
        rows = [self.word_index.get(self._word_key(w), len(self.words)) for w in words]
        return ag.transpose(ag.embedding_gather(aug, rows))

    def parameters(self, prefix):
        out = {f"{prefix}.units": self.unit_table,
               f"{prefix}.proj_w": self.proj_w, f"{prefix}.proj_b": self.proj_b,
               f"{prefix}.words": self.word_table}
        if self.with_bias:
            out[f"{prefix}.bias"] = self.bias_table
        for d in ("fwd", "bwd"):
            for k, v in self.gru[d].items():
                out[f"{prefix}.gru.{d}.{k}"] = v
        return out


def load_word_vectors(path, dim: int) -> dict[str, np.ndarray]:
    """Text-format vectors, one ``<word> <f1> ... <f_dim>`` per line."""
    vectors = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise CheckpointError(f"{path}:{lineno}: expected {dim} floats after the word")
            vectors[parts[0]] = np.array([float(x) for x in parts[1:]])
    return vectors


# -- per-sentence target vocabulary ---------------------------------------------


@dataclass
class TargetVocab:
    words: list[str]
    index: dict[str, int]
    provenance: list[str]  # 's' (sentence), 'c' (common), 'y' (reference)

    def __len__(self):
        return len(self.words)


def build_target_vocab(syllables, vocab: Vocabulary, mode: str,
                       reference=None, n_common: int = 50,
                       prune_keep: float | None = None) -> TargetVocab:
    """Assemble the restricted output vocabulary for one sentence.

    Sentence words are every stored word reachable from any source position
    plus the per-syllable fallback characters. Single-character candidates
    are exempt from pruning so a decode path always exists; everything else
    is prunable by frequency. Common words are the globally most frequent;
    training mode adds the reference words.
    """
    if mode not in ("train", "decode"):
        raise ContractError(f"unknown target-vocab mode {mode!r}")
    if mode == "decode" and reference is not None:
        raise ContractError("decode mode takes no reference")
    if mode == "train" and reference is None:
        raise ContractError("train mode requires the reference words")

    syllables = list(syllables)
    words: list[str] = []
    prov: list[str] = []
    index: dict[str, int] = {}
    unprunable: set[str] = set()

    def push(word, tag, keep=False):
        if keep:
            unprunable.add(word)
        if word not in index:
            index[word] = len(words)
            words.append(word)
            prov.append(tag)

    for i in range(len(syllables)):
        for e in vocab.candidates_for_prefix(syllables[i:]):
            push(e.hanzi, "s", keep=len(e.hanzi) == 1)
    freqs = vocab.hanzi_words()
    ranked = sorted(freqs.items(), key=lambda kv: (-kv[1], kv[0]))
    for w, _ in ranked[:n_common]:
        push(w, "c")
    if mode == "train":
        for w in reference:
            push(w, "y")

    if prune_keep is not None and prune_keep < 1.0:
        prunable = [w for w in words if w not in unprunable]
        keep_n = math.ceil(prune_keep * len(prunable))
        kept = set(sorted(prunable, key=lambda w: (-freqs.get(w, 0), w))[:keep_n])
        sel = [i for i, w in enumerate(words) if w in kept or w in unprunable]
        words = [words[i] for i in sel]
        prov = [prov[i] for i in sel]
        index = {w: i for i, w in enumerate(words)}

    return TargetVocab(words, index, prov)


# -- candidate hypotheses --------------------------------------------------------


@dataclass
class Candidate:
    text: str
    words: list[str]
    score: float


# -- the model --------------------------------------------------------------------


class P2CModel:
    def __init__(self, cfg: ModelConfig, src_units, tgt_units, rng=None):
        self.cfg = cfg
        self.dtype = np.dtype(cfg.dtype)
        rng = rng if rng is not None else ag.seeded_rng(cfg.seed)
        self.rng = rng
        self.src_bank = EmbeddingBank(src_units, lambda w: w, cfg, rng)
        self.tgt_bank = EmbeddingBank(tgt_units, tuple, cfg, rng, with_bias=True)
        H, ED = cfg.hidden, cfg.embed
        dt = self.dtype
        self.enc = []
        for layer in range(cfg.layers):
            d_in = ED if layer == 0 else 2 * H
            self.enc.append({d: self._lstm_params(d_in, H, rng) for d in ("fwd", "bwd")})
        self.dec = []
        for layer in range(cfg.layers):
            d_in = ED if layer == 0 else H
            self.dec.append(self._lstm_params(d_in, H, rng))
        self.W_a = ag.uniform_param(H, 2 * H, rng, dtype=dt)
        self.W_c = ag.uniform_param(3 * H, ED, rng, dtype=dt)
        self.b_c = ag.uniform_param(1, ED, rng, scale=0.0, dtype=dt)
        self.bos = ag.uniform_param(1, ED, rng, dtype=dt)

    def _lstm_params(self, d_in, H, rng):
        b = ag.uniform_param(1, 4 * H, rng, scale=0.0, dtype=self.dtype)
        b.data[0, H:2 * H] = 1.0  # forget-gate bias
        return {"Wx": ag.uniform_param(d_in, 4 * H, rng, dtype=self.dtype),
                "Wh": ag.uniform_param(H, 4 * H, rng, dtype=self.dtype),
                "b": b}

    @classmethod
    def build(cls, cfg: ModelConfig, syllable_inventory, char_inventory,
              vocab: Vocabulary) -> "P2CModel":
        """Fresh model over the given unit alphabets and vocabulary snapshot."""
        model = cls(cfg, sorted(syllable_inventory), sorted(char_inventory))
        model.src_bank.refresh_words(
            {"'".join(w): f for w, f in vocab.pinyin_words().items()})
        model.tgt_bank.refresh_words(vocab.hanzi_words())
        return model

    def parameters(self) -> dict[str, Tensor]:
        params = {}
        params.update(self.src_bank.parameters("src"))
        params.update(self.tgt_bank.parameters("tgt"))
        for i, layer in enumerate(self.enc):
            for d in ("fwd", "bwd"):
                for k, v in layer[d].items():
                    params[f"enc.l{i}.{d}.{k}"] = v
        for i, layer in enumerate(self.dec):
            for k, v in layer.items():
                params[f"dec.l{i}.{k}"] = v
        params.update({"attn.Wa": self.W_a, "attn.Wc": self.W_c,
                       "attn.bc": self.b_c, "bos": self.bos})
        return params

    # -- recurrent cells -----------------------------------------------------

    def _lstm_cell(self, x, h, c, p):
        H = p["Wh"].shape[0]
        gates = ag.add(ag.add(ag.matmul(x, p["Wx"]), ag.matmul(h, p["Wh"])), p["b"])
        i = ag.sigmoid(ag.slice_cols(gates, 0, H))
        f = ag.sigmoid(ag.slice_cols(gates, H, 2 * H))
        g = ag.tanh(ag.slice_cols(gates, 2 * H, 3 * H))
        o = ag.sigmoid(ag.slice_cols(gates, 3 * H, 4 * H))
        c2 = ag.add(ag.mul(f, c), ag.mul(i, g))
        h2 = ag.mul(o, ag.tanh(c2))
        return h2, c2

    def _zeros(self, rows, cols):
        return Tensor(np.zeros((rows, cols)), dtype=self.dtype)

    # -- encoder ----------------------------------------------------------------

    def encode(self, pinyin_words, train=False) -> Tensor:
        """(S, 2H) matrix, one row per source word."""
        if not pinyin_words:
            raise ContractError("encode: empty sentence")
        uniq = []
        seen = {}
        for w in pinyin_words:
            if w not in seen:
                seen[w] = len(uniq)
                uniq.append(w)
        emb = self.src_bank.cwe_matrix(uniq)
        inputs = [ag.embedding_gather(emb, [seen[w]]) for w in pinyin_words]
        H = self.cfg.hidden
        S = len(inputs)
        for layer in range(self.cfg.layers):
            outs = [None] * S
            for d, order in (("fwd", range(S)), ("bwd", range(S - 1, -1, -1))):
                p = self.enc[layer][d]
                h = c = self._zeros(1, H)
                states = [None] * S
                for t in order:
                    x = ag.dropout(inputs[t], self.cfg.dropout, train, self.rng)
                    h, c = self._lstm_cell(x, h, c, p)
                    states[t] = h
                for t in range(S):
                    outs[t] = states[t] if outs[t] is None else ag.concat([outs[t], states[t]], axis=1)
            inputs = outs
        return inputs[0] if S == 1 else ag.concat(inputs, axis=0)

    # -- decoder -----------------------------------------------------------------

    def initial_state(self):
        H = self.cfg.hidden
        return [(self._zeros(1, H), self._zeros(1, H)) for _ in range(self.cfg.layers)]

    def decode_step(self, prev_vec, state, enc_matrix, out_emb, bias_row, train=False):
        """One attention-decoder step.

        Returns the (1, m) logits over the active target vocabulary and the
        next decoder state. Softmaxing the logits gives the distribution;
        restricting to the active set equals a full softmax with all other
        logits at -inf.
        """
        x = prev_vec
        new_state = []
        for layer, p in enumerate(self.dec):
            x = ag.dropout(x, self.cfg.dropout, train, self.rng)
            h, c = self._lstm_cell(x, state[layer][0], state[layer][1], p)
            new_state.append((h, c))
            x = h
        scores = ag.matmul(ag.matmul(x, self.W_a), ag.transpose(enc_matrix))
        align = ag.softmax(scores)
        ctx = ag.matmul(align, enc_matrix)
        ha = ag.tanh(ag.add(ag.matmul(ag.concat([ctx, x], axis=1), self.W_c), self.b_c))
        ha = ag.dropout(ha, self.cfg.dropout, train, self.rng)
        logits = ag.add(ag.matmul(ha, ag.transpose(out_emb)), bias_row)
        return logits, new_state

    def output_matrices(self, tv: TargetVocab):
        """Active-vocabulary output embeddings (m, ED) and bias (1, m)."""
        return self.tgt_bank.cwe_matrix(tv.words), self.tgt_bank.bias_row(tv.words)

    # -- training ------------------------------------------------------------------

    def sentence_loss(self, sentence: ParallelSentence, vocab: Vocabulary,
                      train=True):
        """Teacher-forced cross-entropy over the sentence's target vocabulary."""
        tv = build_target_vocab(sentence.syllables, vocab, "train",
                                reference=sentence.hanzi_words,
                                n_common=self.cfg.common_words)
        for w in sentence.hanzi_words:
            if w not in tv.index:
                raise ContractError(f"reference word {w!r} missing from target vocab")
        enc = self.encode(sentence.pinyin_words, train=train)
        out_emb, bias = self.output_matrices(tv)
        state = self.initial_state()
        prev = self.bos
        total = None
        for word in sentence.hanzi_words:
            logits, state = self.decode_step(prev, state, enc, out_emb, bias, train=train)
            step_loss = ag.cross_entropy(logits, tv.index[word])
            total = step_loss if total is None else ag.add(total, step_loss)
            prev = ag.embedding_gather(out_emb, [tv.index[word]])
        return total, len(sentence.hanzi_words)

    # -- decoding --------------------------------------------------------------------

    def beam_search(self, syllables, vocab: Vocabulary, beam: int | None = None,
                    topk: int | None = None, prune_keep: float | None = None,
                    target_vocab: TargetVocab | None = None) -> list[Candidate]:
        """Lattice-constrained beam search over the input syllables.

        Every hypothesis consumes the syllables exactly: expansions are
        limited to words whose pinyin prefixes the unconsumed remainder.
        Hypotheses with the same surface text keep only their best path.
        A prepared ``target_vocab`` skips the per-call vocabulary assembly
        (the benchmarks time pure decoding).
        """
        syllables = list(syllables)
        if not syllables:
            raise ContractError("beam_search: empty input")
        B = beam or self.cfg.beam
        K = topk or self.cfg.topk
        tv = target_vocab if target_vocab is not None else build_target_vocab(
            syllables, vocab, "decode",
            n_common=self.cfg.common_words, prune_keep=prune_keep)
        out_emb, bias = self.output_matrices(tv)
        enc = self.encode(vocab.segment_pinyin(syllables), train=False)

        options = []
        for i in range(len(syllables)):
            opts = []
            for e in vocab.candidates_for_prefix(syllables[i:]):
                idx = tv.index.get(e.hanzi)
                if idx is not None:
                    opts.append((e.hanzi, idx))
            options.append(opts)

        # item: (score, words, consumed, prev_vec, state)
        active = [(0.0, (), 0, self.bos, self.initial_state())]
        done = []
        while active:
            expansions = []
            still = []
            for score, words, consumed, prev, state in active:
                if consumed == len(syllables):
                    done.append((score, words))
                    continue
                still.append((score, words, consumed, prev, state))
            if not still:
                break
            scored = []
            for score, words, consumed, prev, state in still:
                logits, nstate = self.decode_step(prev, state, enc, out_emb, bias)
                logp = ag.log_softmax_row(logits)
                for word, idx in options[consumed]:
                    scored.append((score + float(logp[idx]), words + (word,),
                                   consumed + len(word), idx, nstate))
            scored.sort(key=lambda it: (-it[0], it[1]))
            active = [(s, w, c, ag.embedding_gather(out_emb, [i]), st)
                      for s, w, c, i, st in scored[:B]]
        best: dict[str, tuple[float, tuple]] = {}
        for score, words in done:
            text = "".join(words)
            cur = best.get(text)
            if cur is None or score > cur[0]:
                best[text] = (score, words)
        ranked = sorted(best.items(), key=lambda kv: (-kv[1][0], kv[0]))
        return [Candidate(text, list(words), score) for text, (score, words) in ranked[:K]]


# -- training loop ------------------------------------------------------------------


def train_model(model: P2CModel, corpus, vocab: Vocabulary, cfg: ModelConfig | None = None,
                checkpoint_dir=None, epoch_hook=None):
    """Plain SGD with teacher forcing; returns the per-epoch log.

    ``epoch_hook(model, epoch, log_row)`` runs after every epoch and may
    return True to stop early (used by overfitting experiments).
    """
    cfg = cfg or model.cfg
    corpus = list(corpus)
    if not corpus:
        raise ContractError("train: empty corpus")
    params = list(model.parameters().values())
    order_rng = ag.seeded_rng(cfg.seed + 1)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        lr = lr_at_epoch(cfg.lr, epoch, cfg.lr_halve_after)
        order = order_rng.permutation(len(corpus))
        total_loss = 0.0
        total_tokens = 0
        t0 = time.time()
        for start in range(0, len(corpus), cfg.batch):
            batch = [corpus[i] for i in order[start:start + cfg.batch]]
            with ag.Tape() as tape:
                loss = None
                tokens = 0
                for sentence in batch:
                    sl, n = model.sentence_loss(sentence, vocab, train=True)
                    loss = sl if loss is None else ag.add(loss, sl)
                    tokens += n
                mean = ag.scale(loss, 1.0 / tokens)
                if not np.isfinite(mean.item()):
                    raise NumericError(
                        f"non-finite loss at epoch {epoch} on {''.join(batch[0].hanzi_words)!r}")
                tape.backward(mean)
            ag.sgd_step(params, lr, cfg.clip_norm)
            total_loss += mean.item() * tokens
            total_tokens += tokens
        row = {"epoch": epoch, "loss": total_loss / total_tokens, "lr": lr,
               "seconds": time.time() - t0}
        history.append(row)
        log.info("epoch %d loss %.4f lr %.4g (%.1fs)", epoch, row["loss"], lr, row["seconds"])
        if checkpoint_dir:
            save_checkpoint(model, os.path.join(checkpoint_dir, f"epoch_{epoch:03d}.ckpt"))
        if epoch_hook and epoch_hook(model, epoch, row):
            break
    return history


# -- checkpoints -----------------------------------------------------------------


def save_checkpoint(model: P2CModel, path):
    """Binary tensor sections plus a JSON sidecar with the index metadata."""
    params = model.parameters()
    dtype = model.dtype
    version = 2 if dtype == np.float64 else 1
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(bytes([version]))
        for name in sorted(params):
            data = params[name].data.astype(dtype, copy=False)
            fh.write(f"{name}\n{data.ndim}\n{' '.join(str(d) for d in data.shape)}\n".encode())
            fh.write(np.ascontiguousarray(data, dtype="<" + dtype.str[1:]).tobytes())
    meta = {
        "config": asdict(model.cfg),
        "src_units": model.src_bank.units,
        "tgt_units": model.tgt_bank.units,
        "src_words": model.src_bank.words,
        "tgt_words": model.tgt_bank.words,
    }
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, ensure_ascii=False)


def _read_exact(fh, n, path):
    buf = fh.read(n)
    if len(buf) != n:
        raise CheckpointError(f"{path}: truncated file")
    return buf


def _read_line(fh, path):
    out = bytearray()
    while True:
        b = fh.read(1)
        if not b:
            raise CheckpointError(f"{path}: truncated header")
        if b == b"\n":
            return out.decode()
        out += b


def load_checkpoint(path) -> P2CModel:
    meta_path = str(path) + ".json"
    if not os.path.exists(meta_path):
        raise CheckpointError(f"{path}: missing sidecar {meta_path}")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    cfg = ModelConfig(**meta["config"])
    model = P2CModel(cfg, meta["src_units"], meta["tgt_units"])
    model.src_bank.words = list(meta["src_words"])
    model.src_bank.word_index = {w: i for i, w in enumerate(model.src_bank.words)}
    model.tgt_bank.words = list(meta["tgt_words"])
    model.tgt_bank.word_index = {w: i for i, w in enumerate(model.tgt_bank.words)}

    sections = {}
    with open(path, "rb") as fh:
        if _read_exact(fh, len(CKPT_MAGIC), path) != CKPT_MAGIC:
            raise CheckpointError(f"{path}: bad magic")
        version = _read_exact(fh, 1, path)[0]
        if version not in _CKPT_DTYPES:
            raise CheckpointError(f"{path}: unsupported version {version}")
        dtype = np.dtype(_CKPT_DTYPES[version])
        while True:
            first = fh.read(1)
            if not first:
                break
            name = first.decode() + _read_line(fh, path)
            rank = int(_read_line(fh, path))
            dims = [int(x) for x in _read_line(fh, path).split()]
            if len(dims) != rank:
                raise CheckpointError(f"{path}: rank/dims mismatch in section {name!r}")
            count = 1
            for d in dims:
                count *= d
            payload = _read_exact(fh, count * dtype.itemsize, path)
            sections[name] = np.frombuffer(payload, dtype="<" + dtype.str[1:]).reshape(dims).astype(dtype)

    # word/bias tables were sized 0 at construction; allocate before loading
    sb, tb = model.src_bank, model.tgt_bank
    sb.word_table = Tensor(np.zeros((len(sb.words), cfg.embed)), requires_grad=True, dtype=dtype)
    tb.word_table = Tensor(np.zeros((len(tb.words), cfg.embed)), requires_grad=True, dtype=dtype)
    tb.bias_table = Tensor(np.zeros((len(tb.words), 1)), requires_grad=True, dtype=dtype)

    params = model.parameters()
    if set(params) != set(sections):
        missing = set(params) ^ set(sections)
        raise CheckpointError(f"{path}: section mismatch: {sorted(missing)[:5]}")
    for name, tensor in params.items():
        if tuple(tensor.data.shape) != tuple(sections[name].shape):
            raise CheckpointError(
                f"{path}: {name} has shape {sections[name].shape}, expected {tensor.data.shape}")
        tensor.data = sections[name]
    return model
