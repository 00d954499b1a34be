import pytest

import pinyinime.autograd as ag
from pinyinime import fixtures
from pinyinime.pinyin import annotate_pinyin
from pinyinime.vocab import BilingualEntry, Vocabulary


@pytest.fixture(autouse=True)
def _reset_default_dtype():
    yield
    ag.set_default_dtype("float32")


@pytest.fixture(scope="session")
def dicts():
    return fixtures.load_fixture_dicts()  # (inventory, cpdict, fallback)


@pytest.fixture(scope="session")
def inventory(dicts):
    return dicts[0]


@pytest.fixture(scope="session")
def cpdict(dicts):
    return dicts[1]


@pytest.fixture(scope="session")
def fallback(dicts):
    return dicts[2]


def make_vocab(words, cpdict, fallback, freqs=None, with_chars=False):
    """Vocabulary from hanzi words, pinyin via first-listed pronunciations."""
    vocab = Vocabulary(fallback=fallback)
    for i, w in enumerate(words):
        py = tuple(annotate_pinyin(w, cpdict))
        freq = freqs[i] if freqs else 1
        vocab.add(BilingualEntry(py, w, freq=freq))
    if with_chars:
        for ch, syls in cpdict.items():
            vocab.add_count((syls[0],), ch, n=0)
    return vocab


@pytest.fixture()
def toy_vocab(cpdict, fallback):
    words = ["北京", "背景", "欢迎", "幻影", "你", "北"]
    return make_vocab(words, cpdict, fallback, freqs=[9, 3, 8, 2, 9, 5])
