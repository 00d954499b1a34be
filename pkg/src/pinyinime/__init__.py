"""Open-vocabulary pinyin-to-character conversion engine.

A word-level attention seq2seq converter over an adaptive bilingual
vocabulary: user selections grow the vocabulary during use, a per-sentence
target vocabulary keeps decoding fast, and keystroke-level metrics measure
the result.
"""

from .engine import OnlineConfig, OnlineEngine, SessionTurn
from .model import Candidate, ModelConfig, P2CModel, desk_config
from .pinyin import ParallelSentence
from .vocab import BilingualEntry, Vocabulary

__all__ = [
    "BilingualEntry",
    "Candidate",
    "ModelConfig",
    "OnlineConfig",
    "OnlineEngine",
    "P2CModel",
    "ParallelSentence",
    "SessionTurn",
    "Vocabulary",
    "desk_config",
]

__version__ = "0.1.0"
