"""Conversion quality metrics and the analysis experiments.

Accuracy is measured per MIU: a converter output counts only when it
matches the gold character run exactly within the first K candidates.
The keystroke score simulates typing the pinyin, paging to the gold
candidate and selecting it; missing candidates cost a pessimistic
per-character re-entry.
"""

from __future__ import annotations

import logging
import math
import statistics
import time
from dataclasses import dataclass, replace

from .errors import ContractError
from .model import Candidate, P2CModel, ModelConfig, build_target_vocab, train_model
from .vocab import Vocabulary

log = logging.getLogger(__name__)


@dataclass
class EvalItem:
    pinyin: list[str]
    gold: str
    candidates: list[Candidate]

    def __post_init__(self):
        if len(self.gold) != len(self.pinyin):
            raise ContractError(f"gold {self.gold!r} misaligned with {len(self.pinyin)} syllables")


@dataclass
class KySSConfig:
    page_size: int = 5
    selection_keystrokes: int = 1
    page_turn_keystrokes: int = 1
    top_k: int = 10

    @property
    def max_pages(self) -> int:
        return math.ceil(self.top_k / self.page_size)


def top_k_accuracy(items, k: int) -> float:
    """Fraction of items whose gold appears within the first k candidates."""
    items = list(items)
    if not items:
        raise ContractError("top_k_accuracy: empty item set")
    if k < 1:
        raise ContractError(f"top_k_accuracy: k must be >= 1, got {k}")
    hits = sum(1 for it in items if any(c.text == it.gold for c in it.candidates[:k]))
    return hits / len(items)


def kyss(items, cfg: KySSConfig | None = None) -> float:
    """Mean ideal/actual keystroke ratio; exactly 1.0 for a rank-1 oracle."""
    cfg = cfg or KySSConfig()
    items = list(items)
    if not items:
        raise ContractError("kyss: empty item set")
    total = 0.0
    for it in items:
        letters = sum(len(s) for s in it.pinyin)
        ideal = letters + cfg.selection_keystrokes
        rank = next((i + 1 for i, c in enumerate(it.candidates[:cfg.top_k])
                     if c.text == it.gold), None)
        if rank is not None:
            actual = (letters
                      + ((rank - 1) // cfg.page_size) * cfg.page_turn_keystrokes
                      + cfg.selection_keystrokes)
        else:
            # give up after the last page and re-enter character by character
            actual = (letters
                      + ((cfg.top_k - 1) // cfg.page_size) * cfg.page_turn_keystrokes
                      + sum(len(s) + 1 for s in it.pinyin))
        total += ideal / actual
    return total / len(items)


def convert_items(model: P2CModel, vocab: Vocabulary, miu_pairs,
                  beam=None, topk=None, prune_keep=None) -> list[EvalItem]:
    """Decode (syllables, gold) pairs into scored evaluation items."""
    items = []
    for syllables, gold in miu_pairs:
        cands = model.beam_search(syllables, vocab, beam=beam, topk=topk,
                                  prune_keep=prune_keep)
        items.append(EvalItem(list(syllables), gold, cands))
    return items


# -- adaptivity on an interlaced two-domain stream -------------------------------


def interlaced_eval(make_engine, segments, group_size: int) -> dict:
    """Per-group top-1 accuracy for online and frozen engines on one stream.

    ``make_engine(online)`` must build a fresh engine from the same base
    state; each engine replays the whole stream with the gold reference
    standing in for the user. ``segments`` is a list of (label, sentences);
    groups never span a segment boundary. Returns {"online": rows,
    "frozen": rows, "vocab_sizes": ..., "turn_logs": ...} where each row is
    (group_index, label, top1) and turn logs carry the raw per-turn records.
    """
    if len(segments) < 2:
        raise ContractError("interlaced_eval: need at least two segments")
    results = {}
    vocab_sizes = {}
    turn_logs = {}
    for mode_name, online in (("online", True), ("frozen", False)):
        engine = make_engine(online=online)
        sizes = [len(engine.vocab)]
        rows = []
        log_rows = []
        group_index = 0
        for label, sentences in segments:
            seg_rows = engine.replay_simulated_user(sentences)
            log_rows.extend(seg_rows)
            for start in range(0, len(seg_rows), group_size):
                group = seg_rows[start:start + group_size]
                if not group:
                    continue
                hits = sum(1 for r in group if r["top1"] == r["chosen"])
                rows.append((group_index, label, hits / len(group)))
                group_index += 1
            sizes.append(len(engine.vocab))
        results[mode_name] = rows
        vocab_sizes[mode_name] = sizes
        turn_logs[mode_name] = log_rows
    results["vocab_sizes"] = vocab_sizes
    results["turn_logs"] = turn_logs
    return results


def post_switch_gaps(results, segments_per_group=None, groups_after=3) -> list[dict]:
    """Mean online-minus-frozen accuracy over the groups after each label switch."""
    online = results["online"]
    frozen = results["frozen"]
    gaps = []
    for i in range(1, len(online)):
        if online[i][1] != online[i - 1][1]:  # segment label changed
            window = range(i, min(i + groups_after, len(online)))
            o = statistics.mean(online[j][2] for j in window)
            f = statistics.mean(frozen[j][2] for j in window)
            gaps.append({"switch_group": i, "label": online[i][1],
                         "online": o, "frozen": f, "gap": o - f})
    return gaps


# -- decode-time vs vocabulary pruning ----------------------------------------------


def prune_bench(model: P2CModel, vocab: Vocabulary, miu_pairs, keep_fractions,
                repeats: int = 5, beam=None, topk=None) -> list[dict]:
    """Decode the items at several target-vocabulary keep fractions.

    The pruned per-sentence vocabularies are prepared outside the timed
    region (a deployed converter prunes once, not per keystroke); the
    reported number is the median pure-decode wall clock per MIU over
    ``repeats`` runs, warm cache. Fraction 1.0 is the unpruned baseline.
    """
    miu_pairs = list(miu_pairs)
    for f in keep_fractions:
        if not (0.0 < f <= 1.0):
            raise ContractError(f"prune_bench: fraction {f} outside (0, 1]")
    prepared = {}
    for fraction in keep_fractions:
        prune = None if fraction >= 1.0 else fraction
        prepared[fraction] = [
            build_target_vocab(p, vocab, "decode",
                               n_common=model.cfg.common_words, prune_keep=prune)
            for p, _ in miu_pairs]

    def decode_pass(fraction):
        return [EvalItem(list(p), gold,
                         model.beam_search(p, vocab, beam=beam, topk=topk,
                                           target_vocab=tv))
                for (p, gold), tv in zip(miu_pairs, prepared[fraction])]

    items = {}
    times = {f: [] for f in keep_fractions}
    order = list(keep_fractions)
    for f in order:  # warm pass, untimed; also yields the accuracy items
        items[f] = decode_pass(f)
    # paired repetitions: each rep times every fraction back to back (order
    # rotated per rep) so load spikes cannot penalize a single fraction
    for rep in range(repeats):
        rotated = order[rep % len(order):] + order[:rep % len(order)]
        for f in rotated:
            t0 = time.perf_counter()
            decode_pass(f)
            times[f].append((time.perf_counter() - t0) * 1000.0 / len(miu_pairs))
    return [{
        "fraction": f,
        "ms_per_miu": statistics.median(times[f]),
        "top5": top_k_accuracy(items[f], 5),
        "mean_target_vocab": sum(len(tv) for tv in prepared[f]) / len(prepared[f]),
    } for f in keep_fractions]


# -- word-embedding filter-ratio sweep ------------------------------------------------


def filter_ratio_sweep(corpus, vocab: Vocabulary, base_cfg: ModelConfig,
                       syllable_inventory, char_inventory, eval_pairs,
                       ratios=(0.0, 0.3, 0.6, 0.9, 1.0), beam=None) -> list[dict]:
    """Train one model per word-embedding filter ratio and report top-5."""
    rows = []
    for ratio in ratios:
        cfg = replace(base_cfg, filter_ratio=ratio)
        model = P2CModel.build(cfg, syllable_inventory, char_inventory, vocab)
        train_model(model, corpus, vocab, cfg)
        items = convert_items(model, vocab, eval_pairs, beam=beam, topk=5)
        acc = top_k_accuracy(items, 5)
        rows.append({"ratio": ratio, "top5": acc,
                     "word_table": len(model.tgt_bank.words)})
        log.info("filter ratio %.1f -> top5 %.3f", ratio, acc)
    return rows
