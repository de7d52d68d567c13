from __future__ import annotations

import json

import pytest

from snprex import fixture_corpus_path
from snprex.cli import run_command
from snprex.corpus import CorpusFormat, parse_corpus, serialize_corpus

from conftest import write_native_corpus

FIXTURE = str(fixture_corpus_path())


def run(capsys, *argv):
    code = run_command(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestStats:
    def test_fixture_tuple(self, capsys):
        code, out, _ = run(capsys, "stats", "--corpus", FIXTURE)
        assert code == 0
        assert out.strip() == "(12, 60, 24, 16, 12)"

    def test_missing_corpus(self, capsys):
        code, _, err = run(capsys, "stats", "--corpus", "/nonexistent.jsonl")
        assert code == 2
        assert err.startswith("snprex-error:")

    def test_native_format(self, capsys, tmp_path):
        root = write_native_corpus(tmp_path / "native", n_train=2, n_test=1)
        code, out, _ = run(capsys, "stats", "--corpus", str(root), "--format", "native")
        assert code == 0
        assert out.strip() == "(3, 3, 1, 1, 1)"


class TestUsage:
    def test_no_command(self, capsys):
        assert run(capsys, )[0] == 1

    def test_unknown_flag(self, capsys):
        assert run(capsys, "stats", "--corpus", FIXTURE, "--bogus")[0] == 1

    def test_help_exits_zero(self, capsys):
        assert run(capsys, "--help")[0] == 0

    def test_bad_config_file(self, capsys, tmp_path):
        bad = tmp_path / "cfg.json"
        bad.write_text("{not json")
        code, _, err = run(capsys, "--config", str(bad), "stats", "--corpus", FIXTURE)
        assert code == 1


class TestIngestAndSplit:
    def test_ingest_writes_canonical(self, capsys, tmp_path):
        out = tmp_path / "out"
        code, _, err = run(capsys, "ingest", "--corpus", FIXTURE, "--out", str(out))
        assert code == 0
        written = out / "corpus.jsonl"
        assert written.exists()
        corpus = parse_corpus(written, CorpusFormat.CANONICAL_JSONL)
        assert serialize_corpus(corpus) == written.read_bytes()

    def test_ingest_native_normalizes(self, capsys, tmp_path):
        root = write_native_corpus(tmp_path / "native")
        out = tmp_path / "out"
        code, *_ = run(capsys, "ingest", "--corpus", str(root), "--format", "native",
                       "--out", str(out))
        assert code == 0
        corpus = parse_corpus(out / "corpus.jsonl", CorpusFormat.CANONICAL_JSONL)
        assert len(corpus.documents) == 3

    def test_split_official(self, capsys, tmp_path):
        out = tmp_path / "out"
        code, *_ = run(capsys, "split", "--corpus", FIXTURE, "--out", str(out))
        assert code == 0
        train = parse_corpus(out / "train.jsonl", CorpusFormat.CANONICAL_JSONL)
        test = parse_corpus(out / "test.jsonl", CorpusFormat.CANONICAL_JSONL)
        assert len(train.documents) == 8
        assert len(test.documents) == 4

    def test_out_env_var(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("SNPREX_OUT", str(tmp_path / "env-out"))
        code, *_ = run(capsys, "ingest", "--corpus", FIXTURE)
        assert code == 0
        assert (tmp_path / "env-out" / "corpus.jsonl").exists()


TRAIN_ARGS = [
    "--encoder", "hashing", "--embed-dim", "8",
    "--conv-filters", "4", "--gru-hidden", "4", "--dense-width", "4",
    "--epochs", "2", "--batch-size", "8", "--max-len-sentence", "24",
    "--seed", "0",
]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run split -> train -> predict -> evaluate once; share artifacts."""
    base = tmp_path_factory.mktemp("pipeline")
    split = base / "split"
    ckpt_out = base / "run"
    codes = []
    codes.append(run_command(["split", "--corpus", FIXTURE, "--out", str(split)]))
    codes.append(run_command([
        "train", "--corpus", str(split / "train.jsonl"), "--out", str(ckpt_out), *TRAIN_ARGS,
    ]))
    codes.append(run_command([
        "predict", "--checkpoint", str(ckpt_out / "checkpoint"),
        "--corpus", str(split / "test.jsonl"), "--out", str(ckpt_out),
    ]))
    codes.append(run_command([
        "evaluate", "--predictions", str(ckpt_out / "predictions.jsonl"),
        "--gold", str(split / "test.jsonl"), "--out", str(ckpt_out),
    ]))
    return codes, base


class TestPipeline:
    def test_all_stages_exit_zero(self, pipeline):
        codes, _ = pipeline
        assert codes == [0, 0, 0, 0]

    def test_artifacts_exist(self, pipeline):
        _, base = pipeline
        run_dir = base / "run"
        for name in ("checkpoint/manifest", "checkpoint/run.json", "checkpoint/vocab.json",
                     "checkpoint/history.csv", "predictions.jsonl", "metrics_sentence.json"):
            assert (run_dir / name).exists(), name

    def test_predictions_cover_test_set(self, pipeline):
        _, base = pipeline
        lines = (base / "run" / "predictions.jsonl").read_text().splitlines()
        test = parse_corpus(base / "split" / "test.jsonl", CorpusFormat.CANONICAL_JSONL)
        n_candidates = sum(len(s.candidates) for d in test.documents for s in d.sentences)
        assert len(lines) == n_candidates
        for line in lines:
            obj = json.loads(line)
            assert set(obj) == {"candidate_ref", "class_id", "prob_0", "prob_1"}
            assert obj["class_id"] in (0, 1)

    def test_metrics_report_well_formed(self, pipeline, capsys):
        _, base = pipeline
        path = base / "run" / "metrics_sentence.json"
        obj = json.loads(path.read_text())
        assert obj["level"] == "SENTENCE"
        assert 0.0 <= obj["f1"] <= 1.0
        code, out, _ = run(capsys, "report", "--metrics", str(path))
        assert code == 0
        assert out.splitlines()[0] == "level,averaging,precision,recall,f1,n_instances"

    def test_abstract_level_evaluate(self, pipeline, capsys):
        _, base = pipeline
        code, out, _ = run(
            capsys, "evaluate",
            "--predictions", str(base / "run" / "predictions.jsonl"),
            "--gold", str(base / "split" / "test.jsonl"),
            "--level", "abstract", "--out", str(base / "run"),
        )
        assert code == 0
        assert (base / "run" / "metrics_abstract.json").exists()

    def test_bootstrap_flag(self, pipeline, capsys):
        _, base = pipeline
        code, *_ = run(
            capsys, "evaluate",
            "--predictions", str(base / "run" / "predictions.jsonl"),
            "--gold", str(base / "split" / "test.jsonl"),
            "--bootstrap", "200", "--out", str(base / "run"),
        )
        assert code == 0
        obj = json.loads((base / "run" / "metrics_sentence.json").read_text())
        lo, hi = obj["f1_bootstrap_ci"]
        assert 0.0 <= lo <= hi <= 1.0

    def test_reports_byte_identical_across_reruns(self, pipeline, tmp_path):
        _, base = pipeline
        split = base / "split"
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert run_command([
                "train", "--corpus", str(split / "train.jsonl"), "--out", str(out), *TRAIN_ARGS,
            ]) == 0
            assert run_command([
                "predict", "--checkpoint", str(out / "checkpoint"),
                "--corpus", str(split / "test.jsonl"), "--out", str(out),
            ]) == 0
            assert run_command([
                "evaluate", "--predictions", str(out / "predictions.jsonl"),
                "--gold", str(split / "test.jsonl"), "--out", str(out),
            ]) == 0
            outs.append(out)
        a, b = outs
        assert (a / "predictions.jsonl").read_bytes() == (b / "predictions.jsonl").read_bytes()
        assert (a / "metrics_sentence.json").read_bytes() == (b / "metrics_sentence.json").read_bytes()
        assert (a / "checkpoint" / "history.csv").read_bytes() == (b / "checkpoint" / "history.csv").read_bytes()


class TestEvaluateErrors:
    def test_prediction_without_gold(self, capsys, tmp_path):
        preds = tmp_path / "p.jsonl"
        preds.write_text(json.dumps({
            "candidate_ref": "ghost", "class_id": 1, "prob_0": 0.2, "prob_1": 0.8,
        }) + "\n")
        code, _, err = run(capsys, "evaluate", "--predictions", str(preds),
                           "--gold", FIXTURE, "--out", str(tmp_path / "out"))
        assert code == 2
        assert "MissingGold" in err

    def test_malformed_predictions(self, capsys, tmp_path):
        preds = tmp_path / "p.jsonl"
        preds.write_text("{broken\n")
        code, *_ = run(capsys, "evaluate", "--predictions", str(preds),
                       "--gold", FIXTURE, "--out", str(tmp_path / "out"))
        assert code == 2


class TestGradcheck:
    def test_exit_zero(self, capsys):
        code, out, _ = run(capsys, "gradcheck", "--seed", "0", "--tiny")
        assert code == 0
        assert out.startswith("max relative error:")

    def test_other_seeds(self, capsys):
        for seed in (1, 7):
            assert run(capsys, "gradcheck", "--seed", str(seed))[0] == 0


class TestConfigFile:
    def test_config_provides_defaults(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"corpus": FIXTURE}))
        code, out, _ = run(capsys, "--config", str(cfg), "stats")
        assert code == 0
        assert out.strip() == "(12, 60, 24, 16, 12)"

    def test_flag_overrides_config(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"corpus": "/nonexistent.jsonl"}))
        code, out, _ = run(capsys, "--config", str(cfg), "stats", "--corpus", FIXTURE)
        assert code == 0
        assert out.strip() == "(12, 60, 24, 16, 12)"
