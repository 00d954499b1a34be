"""Operator entry points: corpus preparation, training, evaluation, serving.

Exit codes: 0 success, 2 usage error, 3 data error, 4 runtime/numeric error.
Option precedence: command-line flags > config file > built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import fields as dataclass_fields

from . import autograd as ag
from .engine import OnlineConfig, OnlineEngine
from .errors import CheckpointError, ImeError, NumericError, ParseError, SegmentationError
from .metrics import (
    KySSConfig,
    convert_items,
    filter_ratio_sweep,
    interlaced_eval,
    kyss,
    post_switch_gaps,
    prune_bench,
    top_k_accuracy,
)
from .model import ModelConfig, P2CModel, load_checkpoint, save_checkpoint, train_model
from .pinyin import (
    CorpusStats,
    ParallelSentence,
    build_parallel_corpus,
    load_char_pinyin_dict,
    load_syllable_inventory,
    miu_items,
    reverse_char_dict,
)
from .vocab import BilingualEntry, Vocabulary

log = logging.getLogger("pinyinime")

PAPER_PROFILE = dict(layers=3, hidden=500, embed=200, dropout=0.3, filter_ratio=0.9,
                     lr=1.0, lr_halve_after=9, epochs=13, batch=32, beam=10, topk=10)
DESK_PROFILE = dict(layers=3, hidden=64, embed=64, dropout=0.0, filter_ratio=0.9,
                    lr=1.0, lr_halve_after=30, epochs=50, batch=16, beam=5, topk=10,
                    common_words=20)

MODEL_KEYS = [f.name for f in dataclass_fields(ModelConfig)]


def add_common_options(p):
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--dict", dest="dict_path", help="char-pinyin TSV")
    p.add_argument("--syllables", dest="syllables_path", help="syllable inventory file")
    p.add_argument("--verbose", action="store_true")


def add_model_options(p):
    p.add_argument("--profile", choices=["paper", "desk"], default=None,
                   help="hyperparameter profile (desk fits on one CPU core)")
    p.add_argument("--layers", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--ed", type=int, dest="embed", help="embedding dimension")
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-halve-after", type=int, dest="lr_halve_after")
    p.add_argument("--dropout", type=float)
    p.add_argument("--filter-ratio", type=float, dest="filter_ratio")
    p.add_argument("--common-words", type=int, dest="common_words")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--beam", type=int)
    p.add_argument("--k", type=int, dest="topk", help="candidates kept per conversion")
    p.add_argument("--dtype", choices=["float32", "float64"])


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pinyinime",
        description="open-vocabulary neural pinyin-to-character converter")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="annotate + segment a hanzi corpus")
    add_common_options(p)
    p.add_argument("--corpus", required=True, help="UTF-8 hanzi text, one sentence per line")
    p.add_argument("--lexicon", help="word list file seeding the segmenter")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-dict-chars", action="store_true",
                   help="do not seed single-character entries from the dictionary")
    p.add_argument("--max-words", type=int, default=60)
    p.add_argument("--ext-a", action="store_true",
                   help="treat CJK Extension A codepoints as Chinese text")

    p = sub.add_parser("train", help="train the converter on a parallel corpus")
    add_common_options(p)
    add_model_options(p)
    p.add_argument("--parallel", required=True, help="parallel TSV from prepare")
    p.add_argument("--vocab", required=True, help="vocabulary TSV from prepare")
    p.add_argument("--out", required=True)
    p.add_argument("--word-vectors", help="pre-trained text-format word vectors")
    p.add_argument("--save-epochs", action="store_true",
                   help="keep a checkpoint per epoch, not only the final one")

    p = sub.add_parser("eval", help="top-K accuracy and keystroke score on a test corpus")
    add_common_options(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--test", required=True, help="hanzi test corpus, one sentence per line")
    p.add_argument("--beam", type=int)
    p.add_argument("--k", type=int, dest="topk")
    p.add_argument("--out", help="directory for metrics.csv (default: print only)")

    p = sub.add_parser("interlace", help="online adaptivity on an interlaced stream")
    add_common_options(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--corpus-a", required=True)
    p.add_argument("--corpus-b", required=True)
    p.add_argument("--segment-size", type=int, default=24)
    p.add_argument("--segments", type=int, default=4)
    p.add_argument("--group-size", type=int, default=8)
    p.add_argument("--train-every", type=int, default=2)
    p.add_argument("--online-epochs", type=int, default=8)
    p.add_argument("--online-lr", type=float, default=0.4)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="decode time versus target-vocabulary pruning")
    add_common_options(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--fractions", default="1.0,0.889,0.75,0.5")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--items", type=int, default=30, help="MIUs per timing run")
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep-filter", help="train/eval across word filter ratios")
    add_common_options(p)
    add_model_options(p)
    p.add_argument("--parallel", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--test", help="hanzi test corpus (defaults to the training set)")
    p.add_argument("--ratios", default="0,0.3,0.6,0.9,1.0")
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the local HTTP service")
    add_common_options(p)
    p.add_argument("--checkpoint", dest="model_checkpoint")
    p.add_argument("--vocab", dest="vocab_path")
    p.add_argument("--port", type=int)
    p.add_argument("--host")
    p.add_argument("--beam", type=int)
    p.add_argument("--k", type=int, dest="topk")
    p.add_argument("--train-every", type=int, dest="train_every")
    p.add_argument("--serve-ui", action="store_true", default=None)
    p.add_argument("--ui-dir")

    p = sub.add_parser("repl", help="line-mode convert/select loop")
    add_common_options(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--train-every", type=int, default=64)

    return parser


class Settings:
    """flags > config file > defaults."""

    def __init__(self, args, defaults=None):
        self.args = vars(args)
        self.file = {}
        if self.args.get("config"):
            with open(self.args["config"], encoding="utf-8") as fh:
                self.file = json.load(fh)
        self.defaults = defaults or {}

    def get(self, key, default=None):
        v = self.args.get(key)
        if v is not None:
            return v
        if key in self.file:
            return self.file[key]
        return self.defaults.get(key, default)


def resolve_model_config(settings) -> ModelConfig:
    profile = settings.get("profile")
    base = dict(DESK_PROFILE if profile == "desk" else PAPER_PROFILE if profile == "paper" else {})
    kwargs = {}
    for key in MODEL_KEYS:
        v = settings.get(key)
        if v is None:
            v = base.get(key)
        if v is not None:
            kwargs[key] = v
    return ModelConfig(**kwargs)


def load_resources(settings):
    syl_path = settings.get("syllables_path")
    dict_path = settings.get("dict_path")
    if not syl_path or not dict_path:
        raise ParseError("--syllables and --dict are required (flag or config)")
    inventory = load_syllable_inventory(syl_path)
    cpdict = load_char_pinyin_dict(dict_path, inventory)
    return inventory, cpdict, reverse_char_dict(cpdict)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def load_parallel(path) -> list[ParallelSentence]:
    out = []
    for lineno, line in enumerate(read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            out.append(ParallelSentence.from_tsv(line))
        except ValueError as exc:
            raise ParseError(str(exc), path=path, line=lineno) from None
    return out


# -- subcommands -----------------------------------------------------------------


def cmd_prepare(settings):
    inventory, cpdict, fallback = load_resources(settings)
    out_dir = settings.get("out")
    os.makedirs(out_dir, exist_ok=True)

    vocab = Vocabulary(fallback=fallback)
    lexicon = settings.get("lexicon")
    if lexicon:
        from .pinyin import annotate_pinyin

        for lineno, word in enumerate(read_lines(lexicon), start=1):
            word = word.strip()
            if not word:
                continue
            try:
                py = tuple(annotate_pinyin(word, cpdict))
            except ImeError as exc:
                raise ParseError(str(exc), path=lexicon, line=lineno) from None
            vocab.add(BilingualEntry(py, word, freq=0))
    if not settings.get("no_dict_chars"):
        for ch, syls in sorted(cpdict.items()):
            vocab.add_count((syls[0],), ch, n=0)

    stats = CorpusStats()
    parallel_path = os.path.join(out_dir, "parallel.tsv")
    with open(parallel_path, "w", encoding="utf-8") as fh:
        for sentence in build_parallel_corpus(settings.get("corpus"), cpdict, vocab,
                                              max_words=settings.get("max_words", 60),
                                              stats=stats,
                                              include_ext_a=bool(settings.get("ext_a"))):
            for py, hz in zip(sentence.pinyin_words, sentence.hanzi_words):
                vocab.add_count(py, hz, n=1)
            fh.write(sentence.to_tsv() + "\n")
    vocab_path = os.path.join(out_dir, "vocab.tsv")
    vocab.save(vocab_path)
    print(f"sentences written: {stats.sentences}")
    print(f"lines skipped: {stats.skipped}")
    print(f"vocabulary entries: {len(vocab)}")
    print(f"parallel corpus: {parallel_path}")
    print(f"vocabulary: {vocab_path}")
    return 0


def cmd_train(settings):
    inventory, cpdict, fallback = load_resources(settings)
    cfg = resolve_model_config(settings)
    ag.set_default_dtype(cfg.dtype)
    out_dir = settings.get("out")
    os.makedirs(out_dir, exist_ok=True)
    corpus = load_parallel(settings.get("parallel"))
    vocab = Vocabulary.load(settings.get("vocab"), fallback=fallback)

    model = P2CModel.build(cfg, inventory, cpdict.keys(), vocab)
    wv = settings.get("word_vectors")
    if wv:
        from .model import load_word_vectors

        hits = model.tgt_bank.seed_word_vectors(load_word_vectors(wv, cfg.embed))
        log.info("seeded %d word vectors", hits)

    ckpt_dir = out_dir if settings.get("save_epochs") else None
    history = train_model(model, corpus, vocab, cfg, checkpoint_dir=ckpt_dir)

    final = os.path.join(out_dir, "model.ckpt")
    save_checkpoint(model, final)
    vocab.save(os.path.join(out_dir, "vocab.tsv"))
    write_csv(os.path.join(out_dir, "train_log.csv"),
              ["epoch", "loss", "lr", "seconds"],
              [[h["epoch"], f"{h['loss']:.6f}", h["lr"], f"{h['seconds']:.2f}"]
               for h in history])
    from .plots import save_loss_curve

    save_loss_curve(history, os.path.join(out_dir, "loss_curve.png"))
    print(f"final loss: {history[-1]['loss']:.4f}")
    print(f"checkpoint: {final}")
    return 0


def _eval_items(settings, model, vocab, cpdict, test_path, beam=None, topk=None):
    pairs = list(miu_items(read_lines(test_path), cpdict))
    if not pairs:
        raise ParseError(f"{test_path}: no evaluable MIUs")
    return convert_items(model, vocab, pairs, beam=beam, topk=topk)


def cmd_eval(settings):
    inventory, cpdict, fallback = load_resources(settings)
    model = load_checkpoint(settings.get("checkpoint"))
    vocab = Vocabulary.load(settings.get("vocab"), fallback=fallback)
    topk = settings.get("topk") or model.cfg.topk
    items = _eval_items(settings, model, vocab, cpdict, settings.get("test"),
                        beam=settings.get("beam"), topk=topk)
    name = os.path.basename(settings.get("checkpoint"))
    accs = {k: top_k_accuracy(items, k) for k in (1, 5, 10) if k <= topk}
    score = kyss(items, KySSConfig(top_k=topk))
    header = "".join(f"Top{k:<7}" for k in accs) + "KySS"
    values = "".join(f"{accs[k]*100:<10.1f}" for k in accs) + f"{score:.4f}"
    print(f"checkpoint: {name} ({len(items)} MIUs)")
    print(header)
    print(values)
    if settings.get("out"):
        os.makedirs(settings.get("out"), exist_ok=True)
        rows = [[f"top{k}", name, f"{accs[k]:.6f}"] for k in accs]
        rows.append(["kyss", name, f"{score:.6f}"])
        write_csv(os.path.join(settings.get("out"), "metrics.csv"),
                  ["metric", "config", "value"], rows)
    return 0


def _segments_from_corpora(settings, cpdict, vocab):
    seg_size = settings.get("segment_size", 24)
    n_segments = settings.get("segments", 4)
    streams = {}
    for label, key in (("A", "corpus_a"), ("B", "corpus_b")):
        sentences = []
        for syllables, gold in miu_items(read_lines(settings.get(key)), cpdict):
            words = vocab.segment_hanzi(gold)
            pinyin, pos = [], 0
            for w in words:
                pinyin.append(tuple(syllables[pos:pos + len(w)]))
                pos += len(w)
            sentences.append(ParallelSentence(pinyin, words))
        streams[label] = sentences
    segments = []
    offsets = {"A": 0, "B": 0}
    for i in range(n_segments):
        label = "A" if i % 2 == 0 else "B"
        start = offsets[label]
        chunk = streams[label][start:start + seg_size]
        if not chunk:
            raise ParseError(f"corpus for segment {label} exhausted at segment {i}")
        offsets[label] = start + seg_size
        segments.append((label, chunk))
    return segments


def cmd_interlace(settings):
    from .engine import copy_model
    from .plots import save_interlace_figure

    inventory, cpdict, fallback = load_resources(settings)
    model = load_checkpoint(settings.get("checkpoint"))
    vocab = Vocabulary.load(settings.get("vocab"), fallback=fallback)
    out_dir = settings.get("out")
    os.makedirs(out_dir, exist_ok=True)
    segments = _segments_from_corpora(settings, cpdict, vocab)
    ocfg = OnlineConfig(train_every=settings.get("train_every", 2),
                        online_epochs=settings.get("online_epochs", 8),
                        online_lr=settings.get("online_lr", 0.4))

    def make_engine(online):
        return OnlineEngine(copy_model(model), vocab.clone(), inventory,
                            cfg=ocfg, online=online)

    results = interlaced_eval(make_engine, segments, settings.get("group_size", 8))
    turn_columns = ["turn_id", "pinyin", "top1", "chosen", "rank_of_chosen",
                    "added_words", "vocab_size"]
    for mode in ("online", "frozen"):
        write_csv(os.path.join(out_dir, f"interlace_{mode}.csv"),
                  ["group_index", "segment_label", "top1"],
                  [[i, label, f"{acc:.4f}"] for i, label, acc in results[mode]])
        write_csv(os.path.join(out_dir, f"turns_{mode}.csv"), turn_columns,
                  [[row[c] for c in turn_columns]
                   for row in results["turn_logs"][mode]])
    save_interlace_figure(results, os.path.join(out_dir, "interlace.png"))
    print("group accuracies written to interlace_online.csv / interlace_frozen.csv")
    for gap in post_switch_gaps(results):
        print(f"switch at group {gap['switch_group']} ({gap['label']}): "
              f"online {gap['online']:.3f} frozen {gap['frozen']:.3f} "
              f"gap {gap['gap']:+.3f}")
    sizes = results["vocab_sizes"]
    print(f"vocabulary growth online {sizes['online'][0]} -> {sizes['online'][-1]}, "
          f"frozen constant: {len(set(sizes['frozen'])) == 1}")
    return 0


def cmd_bench(settings):
    from .plots import save_bench_figure

    inventory, cpdict, fallback = load_resources(settings)
    model = load_checkpoint(settings.get("checkpoint"))
    vocab = Vocabulary.load(settings.get("vocab"), fallback=fallback)
    out_dir = settings.get("out")
    os.makedirs(out_dir, exist_ok=True)
    fractions = [float(x) for x in str(settings.get("fractions")).split(",")]
    pairs = list(miu_items(read_lines(settings.get("test")), cpdict))
    pairs = pairs[:settings.get("items", 30)]
    rows = prune_bench(model, vocab, pairs, fractions,
                       repeats=settings.get("repeats", 5))
    write_csv(os.path.join(out_dir, "bench.csv"),
              ["fraction", "ms_per_miu", "top5", "mean_target_vocab"],
              [[r["fraction"], f"{r['ms_per_miu']:.3f}", f"{r['top5']:.4f}",
                f"{r['mean_target_vocab']:.1f}"] for r in rows])
    save_bench_figure(rows, os.path.join(out_dir, "bench.png"))
    for r in rows:
        print(f"fraction {r['fraction']:<6} {r['ms_per_miu']:8.2f} ms/MIU  "
              f"top5 {r['top5']:.3f}  |V^| {r['mean_target_vocab']:.0f}")
    return 0


def cmd_sweep_filter(settings):
    from .plots import save_sweep_figure

    inventory, cpdict, fallback = load_resources(settings)
    cfg = resolve_model_config(settings)
    ag.set_default_dtype(cfg.dtype)
    out_dir = settings.get("out")
    os.makedirs(out_dir, exist_ok=True)
    corpus = load_parallel(settings.get("parallel"))
    vocab = Vocabulary.load(settings.get("vocab"), fallback=fallback)
    ratios = [float(x) for x in str(settings.get("ratios")).split(",")]
    if settings.get("test"):
        eval_pairs = list(miu_items(read_lines(settings.get("test")), cpdict))
    else:
        eval_pairs = [(s.syllables, s.hanzi) for s in corpus]
    rows = filter_ratio_sweep(corpus, vocab, cfg, inventory, cpdict.keys(),
                              eval_pairs, ratios=ratios, beam=settings.get("beam"))
    write_csv(os.path.join(out_dir, "sweep.csv"),
              ["ratio", "top5", "word_table"],
              [[r["ratio"], f"{r['top5']:.4f}", r["word_table"]] for r in rows])
    save_sweep_figure(rows, os.path.join(out_dir, "sweep.png"))
    print("Filter Ratio " + "  ".join(f"{r['ratio']:.1f}" for r in rows))
    print("Top-5 Acc    " + "  ".join(f"{r['top5']:.3f}" for r in rows))
    return 0


def build_engine(settings, inventory, cpdict, fallback) -> OnlineEngine:
    model = load_checkpoint(settings.get("model_checkpoint") or settings.get("checkpoint"))
    vocab = Vocabulary.load(settings.get("vocab_path") or settings.get("vocab"),
                            fallback=fallback)
    beam = settings.get("beam")
    topk = settings.get("topk") or settings.get("K")
    if beam:
        model.cfg.beam = beam
    if topk:
        model.cfg.topk = topk
    ocfg = OnlineConfig(train_every=settings.get("train_every", 64))
    return OnlineEngine(model, vocab, inventory, cfg=ocfg)


def cmd_serve(settings):
    from .service import run_server

    inventory, cpdict, fallback = load_resources(settings)
    engine = build_engine(settings, inventory, cpdict, fallback)
    run_server(engine,
               host=settings.get("host", "127.0.0.1"),
               port=settings.get("port", 8601),
               serve_ui=bool(settings.get("serve_ui")),
               ui_dir=settings.get("ui_dir"))
    return 0


def cmd_repl(settings):
    inventory, cpdict, fallback = load_resources(settings)
    engine = build_engine(settings, inventory, cpdict, fallback)
    page_size = 5
    print("type pinyin letters; then 1-5 to select, n for next page, q to quit")
    turn = None
    page = 0
    while True:
        try:
            line = input("> ").strip()
        except EOFError:
            break
        if not line:
            continue
        if line == "q":
            break
        if turn is not None and line == "n":
            if (page + 1) * page_size < len(turn.shown):
                page += 1
            _print_page(turn, page, page_size)
            continue
        if turn is not None and line.isdigit() and 1 <= int(line) <= page_size:
            rank = page * page_size + int(line) - 1
            if rank < len(turn.shown):
                done = engine.submit_choice(turn, turn.shown[rank].text)
                added = ", ".join(e.hanzi for e in done.update.added) or "none"
                print(f"committed {done.choice}  (new words: {added}, "
                      f"vocabulary {len(engine.vocab)})")
                turn, page = None, 0
            continue
        try:
            turn = engine.convert(line)
        except SegmentationError as exc:
            print(f"cannot segment: {exc}")
            continue
        page = 0
        _print_page(turn, page, page_size)
    return 0


def _print_page(turn, page, page_size):
    print("'".join(turn.pinyin))
    for i, cand in enumerate(turn.page(page, page_size), start=1):
        print(f"  {i}. {cand.text}  ({cand.score:.2f})")


COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "eval": cmd_eval,
    "interlace": cmd_interlace,
    "bench": cmd_bench,
    "sweep-filter": cmd_sweep_filter,
    "serve": cmd_serve,
    "repl": cmd_repl,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    settings = Settings(args)
    try:
        return COMMANDS[args.command](settings)
    except (ParseError, CheckpointError, SegmentationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, ImeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
