import subprocess
import sys

import pytest

from pinyinime import fixtures
from pinyinime.cli import main

TINY_TRAIN = ["--layers", "1", "--hidden", "12", "--ed", "8", "--epochs", "2",
              "--batch", "4", "--common-words", "8", "--seed", "3",
              "--beam", "4", "--k", "5"]


@pytest.fixture(scope="module")
def data_paths(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    with fixtures.resources.as_file(fixtures.data_path("syllables.txt")) as p:
        syl = root / "syllables.txt"
        syl.write_bytes(p.read_bytes())
    with fixtures.resources.as_file(fixtures.data_path("char_pinyin.tsv")) as p:
        dic = root / "char_pinyin.tsv"
        dic.write_bytes(p.read_bytes())
    corpus = root / "corpus.txt"
    fixtures.write_lines(corpus, fixtures.toy_corpus_lines("news", 30, seed=4))
    lexicon = root / "lexicon.txt"
    fixtures.write_lines(lexicon, fixtures.lexicon_words("news"))
    test_corpus = root / "test.txt"
    fixtures.write_lines(test_corpus, fixtures.toy_corpus_lines("news", 10, seed=5))
    return {"root": root, "syllables": str(syl), "dict": str(dic),
            "corpus": str(corpus), "lexicon": str(lexicon), "test": str(test_corpus)}


@pytest.fixture(scope="module")
def prepared(data_paths):
    out = data_paths["root"] / "prepared"
    rc = main(["prepare", "--corpus", data_paths["corpus"],
               "--lexicon", data_paths["lexicon"],
               "--dict", data_paths["dict"], "--syllables", data_paths["syllables"],
               "--out", str(out)])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def trained(data_paths, prepared):
    out = data_paths["root"] / "trained"
    rc = main(["train", "--parallel", str(prepared / "parallel.tsv"),
               "--vocab", str(prepared / "vocab.tsv"),
               "--dict", data_paths["dict"], "--syllables", data_paths["syllables"],
               "--out", str(out), *TINY_TRAIN])
    assert rc == 0
    return out


class TestPrepare:
    def test_outputs_match_summary(self, data_paths, capsys):
        out = data_paths["root"] / "prepared_counted"
        rc = main(["prepare", "--corpus", data_paths["corpus"],
                   "--lexicon", data_paths["lexicon"],
                   "--dict", data_paths["dict"],
                   "--syllables", data_paths["syllables"], "--out", str(out)])
        assert rc == 0
        printed = capsys.readouterr().out
        summary = {}
        for line in printed.splitlines():
            if ":" in line:
                key, _, value = line.partition(":")
                summary[key.strip()] = value.strip()
        parallel = (out / "parallel.tsv").read_text(encoding="utf-8").splitlines()
        vocab = (out / "vocab.tsv").read_text(encoding="utf-8").splitlines()
        assert len(parallel) == int(summary["sentences written"])
        assert len(vocab) == int(summary["vocabulary entries"])
        assert len(vocab) > 250  # dictionary chars seeded as single-char entries

    def test_missing_corpus_is_data_error(self, data_paths):
        rc = main(["prepare", "--corpus", "/nonexistent.txt",
                   "--dict", data_paths["dict"],
                   "--syllables", data_paths["syllables"],
                   "--out", str(data_paths["root"] / "x")])
        assert rc == 3


class TestTrain:
    def test_artifacts_written(self, trained):
        assert (trained / "model.ckpt").exists()
        assert (trained / "model.ckpt.json").exists()
        assert (trained / "vocab.tsv").exists()
        assert (trained / "train_log.csv").exists()
        assert (trained / "loss_curve.png").exists()

    def test_log_has_one_row_per_epoch(self, trained):
        rows = (trained / "train_log.csv").read_text().splitlines()
        assert rows[0] == "epoch,loss,lr,seconds"
        assert len(rows) == 1 + 2  # header + 2 epochs


class TestEval:
    def test_prints_metrics_and_writes_csv(self, data_paths, trained, capsys):
        out = data_paths["root"] / "metrics"
        rc = main(["eval", "--checkpoint", str(trained / "model.ckpt"),
                   "--vocab", str(trained / "vocab.tsv"),
                   "--test", data_paths["test"],
                   "--dict", data_paths["dict"],
                   "--syllables", data_paths["syllables"],
                   "--out", str(out)])
        assert rc == 0
        printed = capsys.readouterr().out
        assert "Top1" in printed and "KySS" in printed
        csv_lines = (out / "metrics.csv").read_text().splitlines()
        assert csv_lines[0] == "metric,config,value"
        metrics = {line.split(",")[0] for line in csv_lines[1:]}
        assert {"top1", "top5", "kyss"} <= metrics


class TestBench:
    def test_rows_and_figure(self, data_paths, trained, capsys):
        out = data_paths["root"] / "bench"
        rc = main(["bench", "--checkpoint", str(trained / "model.ckpt"),
                   "--vocab", str(trained / "vocab.tsv"),
                   "--test", data_paths["test"],
                   "--dict", data_paths["dict"],
                   "--syllables", data_paths["syllables"],
                   "--fractions", "1.0,0.5", "--repeats", "2", "--items", "6",
                   "--out", str(out)])
        assert rc == 0
        lines = (out / "bench.csv").read_text().splitlines()
        assert lines[0] == "fraction,ms_per_miu,top5,mean_target_vocab"
        assert len(lines) == 3
        assert (out / "bench.png").exists()


class TestInterlace:
    def test_csvs_and_figure(self, data_paths, trained):
        root = data_paths["root"]
        corpus_b = root / "chat.txt"
        fixtures.write_lines(corpus_b, fixtures.stream_pool_lines("chat", 20, seed=9))
        corpus_a = root / "news_stream.txt"
        fixtures.write_lines(corpus_a, fixtures.stream_pool_lines("news", 20, seed=8))
        out = root / "interlace"
        rc = main(["interlace", "--checkpoint", str(trained / "model.ckpt"),
                   "--vocab", str(trained / "vocab.tsv"),
                   "--corpus-a", str(corpus_a), "--corpus-b", str(corpus_b),
                   "--dict", data_paths["dict"], "--syllables", data_paths["syllables"],
                   "--segment-size", "6", "--segments", "2", "--group-size", "3",
                   "--train-every", "3", "--online-epochs", "2",
                   "--out", str(out)])
        assert rc == 0
        for mode in ("online", "frozen"):
            lines = (out / f"interlace_{mode}.csv").read_text().splitlines()
            assert lines[0] == "group_index,segment_label,top1"
            assert len(lines) == 1 + 4  # 2 segments x 2 groups
            turns = (out / f"turns_{mode}.csv").read_text().splitlines()
            assert turns[0] == \
                "turn_id,pinyin,top1,chosen,rank_of_chosen,added_words,vocab_size"
            assert len(turns) == 1 + 12  # one row per replayed sentence
        assert (out / "interlace.png").exists()


class TestSweep:
    def test_ratio_grid(self, data_paths, prepared, capsys):
        out = data_paths["root"] / "sweep"
        rc = main(["sweep-filter", "--parallel", str(prepared / "parallel.tsv"),
                   "--vocab", str(prepared / "vocab.tsv"),
                   "--dict", data_paths["dict"], "--syllables", data_paths["syllables"],
                   "--ratios", "0,1.0", "--out", str(out),
                   "--layers", "1", "--hidden", "10", "--ed", "6", "--epochs", "1",
                   "--batch", "8", "--common-words", "6", "--beam", "3", "--seed", "2"])
        assert rc == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "ratio,top5,word_table"
        assert len(lines) == 3
        assert (out / "sweep.png").exists()


class TestUsage:
    @pytest.mark.parametrize("cmd", ["prepare", "train", "eval", "interlace",
                                     "bench", "sweep-filter", "serve", "repl"])
    def test_help_exits_zero(self, cmd):
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["prepare", "--nonsense"])
        assert exc.value.code == 2

    def test_missing_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2


class TestRepl:
    def test_convert_and_select_loop(self, data_paths, trained):
        proc = subprocess.run(
            [sys.executable, "-m", "pinyinime.cli", "repl",
             "--checkpoint", str(trained / "model.ckpt"),
             "--vocab", str(trained / "vocab.tsv"),
             "--dict", data_paths["dict"], "--syllables", data_paths["syllables"]],
            input="nihao\n1\nq\n", text=True, capture_output=True, timeout=120)
        assert proc.returncode == 0
        assert "1." in proc.stdout
        assert "committed" in proc.stdout


class TestSettings:
    def test_paper_profile_matches_published_recipe(self):
        from pinyinime.cli import Settings, build_parser, resolve_model_config

        args = build_parser().parse_args(
            ["train", "--parallel", "p", "--vocab", "v", "--out", "o",
             "--profile", "paper"])
        cfg = resolve_model_config(Settings(args))
        assert cfg.layers == 3 and cfg.hidden == 500
        assert cfg.lr == 1.0 and cfg.lr_halve_after == 9
        assert cfg.dropout == 0.3 and cfg.filter_ratio == 0.9
        assert cfg.epochs == 13 and cfg.batch == 32

    def test_flags_beat_config_file_beats_defaults(self, tmp_path):
        import json

        from pinyinime.cli import Settings, build_parser

        cfg_file = tmp_path / "config.json"
        cfg_file.write_text(json.dumps({"port": 9999, "beam": 7}), encoding="utf-8")
        args = build_parser().parse_args(
            ["serve", "--config", str(cfg_file), "--beam", "3"])
        settings = Settings(args)
        assert settings.get("beam") == 3            # flag wins
        assert settings.get("port", 8601) == 9999   # file beats default
        assert settings.get("host", "127.0.0.1") == "127.0.0.1"


class TestServe:
    def test_service_boots_and_answers(self, data_paths, trained):
        import json
        import time
        import urllib.request

        port = 8646
        cfg = {
            "model_checkpoint": str(trained / "model.ckpt"),
            "vocab_path": str(trained / "vocab.tsv"),
            "dict_path": data_paths["dict"],
            "syllables_path": data_paths["syllables"],
            "port": port,
            "train_every": 64,
        }
        cfg_path = data_paths["root"] / "serve.json"
        cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
        proc = subprocess.Popen(
            [sys.executable, "-m", "pinyinime.cli", "serve",
             "--config", str(cfg_path)],
            stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
        try:
            deadline = time.time() + 30
            stats = None
            while time.time() < deadline:
                try:
                    with urllib.request.urlopen(
                            f"http://127.0.0.1:{port}/api/stats", timeout=2) as resp:
                        stats = json.load(resp)
                    break
                except OSError:
                    time.sleep(0.3)
            assert stats is not None, "service never came up"
            assert stats["turns"] == 0 and stats["vocab_size"] > 0
        finally:
            proc.terminate()
            proc.wait(timeout=10)
