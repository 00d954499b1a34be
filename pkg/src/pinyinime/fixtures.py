"""Deterministic toy corpora over the bundled dictionary.

Two domains share the everyday single characters but use disjoint
multi-character words; many "chat" words are homophones of "news" words
(背景/北京, 事件/时间, 幻影/欢迎 ...), so a converter trained on one
domain systematically mistakes the other until it learns its words.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .pinyin import load_char_pinyin_dict, load_syllable_inventory, reverse_char_dict

SHARED_WORDS = [
    "的", "我", "你", "他", "是", "好", "说", "看", "来", "去",
    "大", "小", "人", "水", "山", "天", "年", "月", "一", "三",
]

NEWS_WORDS = [
    "北京", "欢迎", "中国", "人民", "工作", "学生", "电脑", "火车", "商店", "时间",
    "新闻", "文化", "科学", "国家", "经济", "会议", "记者", "安全", "公司", "明天",
    "东西", "大学", "可以", "一起", "市场", "上海", "工人", "海洋", "语文", "声明",
    "活动", "理事", "首长", "生活", "花生",
]

CHAT_WORDS = [
    "背景", "幻影", "事件", "大雪", "商海", "钟国", "李静", "张阳", "白雪", "马力",
    "想你", "吃饭", "喝茶", "电影", "回家", "开心", "小妹", "酒店", "名字", "美景",
    "笑话",
]

SENTENCE_SHAPES = [
    ("W", "W", "S"),
    ("S", "W", "W"),
    ("W", "S", "W", "W"),
    ("W", "W"),
    ("S", "W", "W", "S"),
    ("W", "W", "W"),
]


def data_path(name: str):
    return resources.files("pinyinime.data").joinpath(name)


def load_fixture_dicts():
    """(syllable inventory, char->pinyin dict, syllable->chars fallback)."""
    with resources.as_file(data_path("syllables.txt")) as p:
        inventory = load_syllable_inventory(p)
    with resources.as_file(data_path("char_pinyin.tsv")) as p:
        cpdict = load_char_pinyin_dict(p, inventory)
    return inventory, cpdict, reverse_char_dict(cpdict)


def domain_words(domain: str) -> list[str]:
    if domain == "news":
        return list(NEWS_WORDS)
    if domain == "chat":
        return list(CHAT_WORDS)
    raise ValueError(f"unknown domain {domain!r}")


def toy_corpus_lines(domain: str, n: int, seed: int = 0, punctuate: bool = True) -> list[str]:
    """n sentences built from the domain lexicon, Zipf-flavored word choice."""
    words = domain_words(domain)
    rng = np.random.Generator(np.random.PCG64(seed))
    word_p = 1.0 / np.arange(1, len(words) + 1) ** 0.5
    word_p /= word_p.sum()
    shared_p = 1.0 / np.arange(1, len(SHARED_WORDS) + 1)
    shared_p /= shared_p.sum()
    lines = []
    for _ in range(n):
        shape = SENTENCE_SHAPES[rng.integers(len(SENTENCE_SHAPES))]
        parts = []
        for kind in shape:
            if kind == "W":
                parts.append(words[rng.choice(len(words), p=word_p)])
            else:
                parts.append(SHARED_WORDS[rng.choice(len(SHARED_WORDS), p=shared_p)])
        line = "".join(parts)
        if punctuate and rng.random() < 0.25 and len(parts) >= 3:
            cut = int(rng.integers(1, len(parts)))
            line = "".join(parts[:cut]) + "，" + "".join(parts[cut:]) + "。"
        lines.append(line)
    return lines


def write_lines(path, lines):
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def lexicon_words(domain: str) -> list[str]:
    return sorted(set(domain_words(domain)) | set(SHARED_WORDS))


def base_corpus_lines(n: int, seed: int = 0) -> list[str]:
    """Sentences of shared single-character words only (the neutral domain)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return ["".join(rng.choice(SHARED_WORDS, size=int(rng.integers(2, 5))))
            for _ in range(n)]


def stream_words(domain: str) -> list[str]:
    """Domain words containing no shared single-character word.

    Used by the adaptation experiments: a converter that only knows the
    shared singles cannot luck into these words through its trained
    character preferences.
    """
    shared = set("".join(SHARED_WORDS))
    return [w for w in domain_words(domain) if not (set(w) & shared)]


def stream_pool_lines(domain: str, n: int, seed: int = 0, pool_size: int = 12,
                      singles: bool = True) -> list[str]:
    """Chat-style stream: n draws from a small pool of repeated sentences.

    Each pool sentence pairs two domain words, optionally with one shared
    single between or around them.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    words = stream_words(domain)
    pool = []
    for _ in range(pool_size):
        a = words[rng.choice(len(words))]
        b = words[rng.choice(len(words))]
        if singles and rng.random() < 0.6:
            s = SHARED_WORDS[rng.choice(len(SHARED_WORDS))]
            parts = [a, s, b] if rng.random() < 0.5 else [a, b, s]
        else:
            parts = [a, b]
        pool.append("".join(parts))
    return [pool[rng.choice(pool_size)] for _ in range(n)]
