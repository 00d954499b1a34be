import statistics

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pinyinime import fixtures
from pinyinime.engine import OnlineConfig, OnlineEngine, copy_model
from pinyinime.errors import ContractError
from pinyinime.metrics import (
    EvalItem,
    KySSConfig,
    convert_items,
    filter_ratio_sweep,
    interlaced_eval,
    kyss,
    prune_bench,
    top_k_accuracy,
)
from pinyinime.model import Candidate, ModelConfig, P2CModel, train_model
from pinyinime.pinyin import annotate_pinyin, parallel_from_line
from pinyinime.vocab import BilingualEntry, Vocabulary


def item(pinyin, gold, texts):
    cands = [Candidate(t, [t], -float(i)) for i, t in enumerate(texts)]
    return EvalItem(pinyin, gold, cands)


@pytest.fixture(scope="module")
def news_setup(dicts):
    """An in-domain trained converter over the news fixture."""
    inventory, cpdict, fallback = dicts
    vocab = Vocabulary(fallback=fallback)
    for w in fixtures.lexicon_words("news"):
        vocab.add(BilingualEntry(tuple(annotate_pinyin(w, cpdict)), w))
    for ch, syls in sorted(cpdict.items()):
        vocab.add_count((syls[0],), ch, n=0)
    corpus = []
    for line in fixtures.toy_corpus_lines("news", 80, seed=13):
        corpus.extend(parallel_from_line(line, cpdict, vocab))
    for s in corpus:
        for py, hz in zip(s.pinyin_words, s.hanzi_words):
            vocab.add_count(py, hz, n=1)
    cfg = ModelConfig(layers=2, hidden=32, embed=32, dropout=0.0, common_words=15,
                      seed=5, epochs=4, batch=8, lr=1.0, lr_halve_after=99,
                      beam=5, topk=5)
    model = P2CModel.build(cfg, inventory, cpdict.keys(), vocab)
    train_model(model, corpus, vocab, cfg)
    held_out = []
    for line in fixtures.toy_corpus_lines("news", 48, seed=14, punctuate=False):
        held_out.extend(parallel_from_line(line, cpdict, vocab))
    return {"inventory": inventory, "cpdict": cpdict, "model": model,
            "vocab": vocab, "corpus": corpus, "held_out": held_out, "cfg": cfg}


class TestTopK:
    def test_perfect_converter(self):
        items = [item(["ni"], "你", ["你", "尼"]) for _ in range(5)]
        for k in (1, 2, 5):
            assert top_k_accuracy(items, k) == 1.0

    def test_gold_at_rank_three(self):
        items = [item(["ni"], "你", ["尼", "泥", "你"]) for _ in range(4)]
        assert top_k_accuracy(items, 1) == 0.0
        assert top_k_accuracy(items, 5) == 1.0

    def test_hand_counted_ten_items(self):
        # gold ranks: 1,1,2,3,6,11,1,4,5,absent
        # hand count: top-1 hits {1,1,1} = 3; top-5 {1,1,2,3,1,4,5} = 7;
        # top-10 adds rank 6 = 8; top-11 adds rank 11 = 9
        ranks = [1, 1, 2, 3, 6, 11, 1, 4, 5, None]
        items = []
        for r in ranks:
            texts = [f"字{i}" for i in range(12)]
            gold = "你"
            if r is not None:
                texts[r - 1] = gold
            items.append(item(["ni"], gold, texts))
        assert top_k_accuracy(items, 1) == pytest.approx(3 / 10)
        assert top_k_accuracy(items, 5) == pytest.approx(7 / 10)
        assert top_k_accuracy(items, 10) == pytest.approx(8 / 10)
        assert top_k_accuracy(items, 11) == pytest.approx(9 / 10)

    def test_empty_items_rejected(self):
        with pytest.raises(ContractError):
            top_k_accuracy([], 1)

    @given(st.lists(st.integers(min_value=1, max_value=12), min_size=1, max_size=30))
    def test_nondecreasing_in_k(self, ranks):
        items = []
        for r in ranks:
            texts = [f"字{i}" for i in range(12)]
            texts[r - 1] = "你"
            items.append(item(["ni"], "你", texts))
        accs = [top_k_accuracy(items, k) for k in range(1, 13)]
        assert all(a <= b for a, b in zip(accs, accs[1:]))


class TestKyss:
    def test_oracle_converter_scores_exactly_one(self):
        items = [item(["bei", "jing"], "北京", ["北京", "背景"]),
                 item(["ni"], "你", ["你"])]
        assert kyss(items) == 1.0

    def test_rank_six_hand_count(self):
        # 5 pinyin letters, gold at rank 6 with page size 5:
        # ideal = 5 + 1 = 6; actual = 5 + 1 page turn + 1 selection = 7
        texts = ["甲乙", "丙丁", "戊己", "庚辛", "壬癸", "北京"]
        it = EvalItem(["bei", "ji"], "北京", [Candidate(t, [t], -1.0) for t in texts])
        assert kyss([it]) == pytest.approx(6 / 7)

    def test_gold_absent_uses_per_character_reentry(self):
        texts = [f"字{i}" for i in range(10)]
        it = EvalItem(["bei", "jing"], "北京", [Candidate(t, [t], -1.0) for t in texts])
        letters = 7
        ideal = letters + 1
        actual = letters + ((10 - 1) // 5) * 1 + (len("bei") + 1) + (len("jing") + 1)
        assert kyss([it], KySSConfig(top_k=10)) == pytest.approx(ideal / actual)

    def test_worse_rank_strictly_decreases_score(self):
        def with_rank(r):
            texts = [f"字{i}" for i in range(12)]
            texts[r - 1] = "你"
            return [item(["ni", "hao"], "你好", ["你好"]),
                    item(["ni"], "你", texts)]
        scores = [kyss(with_rank(r), KySSConfig(top_k=12)) for r in (1, 6, 11)]
        assert scores[0] > scores[1] > scores[2]

    def test_kyss_is_one_iff_gold_on_first_page(self):
        # in-page rank is free under the keystroke model: picking slot 2
        # costs the same single selection keystroke as slot 1
        first_page = [item(["ni"], "你", ["尼", "你"])]
        second_page = [item(["ni"], "你", ["字0", "字1", "字2", "字3", "字4", "你"])]
        assert kyss(first_page) == 1.0
        assert kyss(second_page) < 1.0


class TestInterlacedEval:
    def segments(self, setup, labels_and_seeds):
        segs = []
        for label, seed in labels_and_seeds:
            if label == "news":  # in-domain segments reuse held-out text
                segs.append(("N", setup["held_out"][seed % 2 * 12:][:12]))
                continue
            sentences = []
            for line in fixtures.stream_pool_lines(label, 12, seed=seed):
                sentences.extend(parallel_from_line(line, setup["cpdict"],
                                                    setup["vocab"]))
            segs.append(("C", sentences[:12]))
        return segs

    def make_engine_factory(self, setup):
        def make(online):
            return OnlineEngine(copy_model(setup["model"]),
                                setup["vocab"].clone(), setup["inventory"],
                                OnlineConfig(train_every=3, online_epochs=4,
                                             online_lr=0.3), online=online)
        return make

    def test_frozen_in_domain_series_is_flat(self, news_setup):
        segs = self.segments(news_setup, [("news", 0), ("news", 1)])
        res = interlaced_eval(self.make_engine_factory(news_setup), segs,
                              group_size=4)
        frozen = [r[2] for r in res["frozen"]]
        assert max(frozen) - min(frozen) <= 0.5  # variance only, no trend
        assert statistics.mean(frozen) > 0.5     # in-domain stays strong

    def test_online_recovers_after_domain_switch(self, news_setup):
        segs = self.segments(news_setup, [("news", 0), ("chat", 31)])
        res = interlaced_eval(self.make_engine_factory(news_setup), segs,
                              group_size=4)
        online_chat = [r[2] for r in res["online"] if r[1] == "C"]
        frozen_chat = [r[2] for r in res["frozen"] if r[1] == "C"]
        # rising trend after the switch, ahead of the frozen engine
        assert online_chat[-1] > online_chat[0] or online_chat[0] > 0.5
        assert statistics.mean(online_chat) > statistics.mean(frozen_chat)

    def test_identical_domains_look_alike(self, news_setup):
        segs = self.segments(news_setup, [("news", 0), ("news", 1)])
        res = interlaced_eval(self.make_engine_factory(news_setup), segs,
                              group_size=4)
        online = statistics.mean(r[2] for r in res["online"])
        frozen = statistics.mean(r[2] for r in res["frozen"])
        assert abs(online - frozen) <= 0.25

    def test_frozen_never_mutates_vocab(self, news_setup):
        segs = self.segments(news_setup, [("news", 0), ("chat", 77)])
        res = interlaced_eval(self.make_engine_factory(news_setup), segs,
                              group_size=4)
        assert len(set(res["vocab_sizes"]["frozen"])) == 1
        assert res["vocab_sizes"]["online"][-1] >= res["vocab_sizes"]["online"][0]


class TestPruneBench:
    def test_fraction_one_equals_unpruned_baseline(self, news_setup):
        pairs = [(s.syllables, s.hanzi) for s in news_setup["corpus"][:8]]
        rows = prune_bench(news_setup["model"], news_setup["vocab"], pairs,
                           [1.0], repeats=1, beam=5, topk=5)
        baseline = top_k_accuracy(
            convert_items(news_setup["model"], news_setup["vocab"], pairs,
                          beam=5, topk=5), 5)
        assert rows[0]["top5"] == baseline

    def test_rejects_bad_fraction(self, news_setup):
        with pytest.raises(ContractError):
            prune_bench(news_setup["model"], news_setup["vocab"],
                        [(["ni"], "你")], [0.0])


class TestFilterRatioSweep:
    def test_character_only_underperforms_mixed(self, news_setup):
        pairs = [(s.syllables, s.hanzi) for s in news_setup["corpus"]]
        rows = filter_ratio_sweep(news_setup["corpus"], news_setup["vocab"],
                                  news_setup["cfg"], news_setup["inventory"],
                                  news_setup["cpdict"].keys(), pairs,
                                  ratios=(0.0, 0.9), beam=5)
        assert rows[0]["ratio"] == 0.0 and rows[0]["word_table"] == 0
        assert rows[0]["top5"] < rows[1]["top5"]
        for r in rows:
            assert 0.0 <= r["top5"] <= 1.0
