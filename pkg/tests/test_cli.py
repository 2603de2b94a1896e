"""Command surface: exit codes, artifact determinism, error naming."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from emopipe.cli import run_command
from emopipe.corpus import dump_corpus
from emopipe.labels import EMOTIONS

from conftest import make_corpus, write_jsonl


def _write_corpus(tmp_path, n=6, split="train") -> Path:
    corpus = make_corpus(n, tmp_path=tmp_path, split=split)
    path = tmp_path / "corpus.jsonl"
    dump_corpus(corpus, path)
    return path


def _write_mock_script(tmp_path) -> Path:
    script = {
        "aux_text": json.dumps({"Sentiment": "neutral",
                                "Emotion_keywords": ["biasa"],
                                "Explanation": "kata-kata netral"}),
        "aux_audio": json.dumps({"Sentiment": "neutral", "Explanation": "nada datar"}),
        "aux_visual": json.dumps({"Sentiment": "neutral", "Explanation": "wajah tenang"}),
        "main_sentiment": json.dumps({"Sentiment": "neutral"}),
        "main_emotion": json.dumps({"Sentiment": "neutral", "Emotion": "neutral"}),
    }
    path = tmp_path / "mock.json"
    path.write_text(json.dumps(script), encoding="utf-8")
    return path


def _write_config(tmp_path, **extra) -> Path:
    config = {
        "output_dir": str(tmp_path / "out"),
        "gateway": {"transport": "mock", "mock_script": str(_write_mock_script(tmp_path)),
                    "backoff_s": 0.0},
        "generation": {"model_id": "mock-model"},
        **extra,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


def test_validate_clean_manifest_exits_zero(tmp_path, capsys):
    corpus_path = _write_corpus(tmp_path)
    config = _write_config(tmp_path)
    status = run_command(["--config", str(config), "validate",
                          "--corpus", str(corpus_path)])
    assert status == 0
    report = json.loads((tmp_path / "out" / "validation_report.json").read_text())
    assert report["errors"] == []
    assert "config_hash" in report
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["status"] == "ok"


def test_validate_broken_manifest_exits_nonzero(tmp_path):
    corpus_path = _write_corpus(tmp_path)
    lines = corpus_path.read_text().splitlines()
    record = json.loads(lines[0])
    record["duration_s"] = -2
    lines[0] = json.dumps(record, ensure_ascii=False)
    corpus_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    config = _write_config(tmp_path)
    assert run_command(["--config", str(config), "validate",
                        "--corpus", str(corpus_path)]) == 1


def test_aggregate_writes_decisions_and_rates(tmp_path, capsys):
    records = []
    for seg in ("s1", "s2"):
        for i in range(5):
            records.append({"segment_id": seg, "annotator_id": f"a{i}",
                            "phase": "sentiment",
                            "vote": "positive" if i < 3 else "neutral"})
        for i in range(5):
            scores = dict.fromkeys(EMOTIONS, 0)
            scores["happiness"] = 2
            records.append({"segment_id": seg, "annotator_id": f"a{i}",
                            "phase": "emotion", "scores": scores})
    ann_path = write_jsonl(tmp_path / "ann.jsonl", records)
    config = _write_config(tmp_path)
    assert run_command(["--config", str(config), "aggregate",
                        "--records", str(ann_path)]) == 0
    decisions = [json.loads(l) for l in
                 (tmp_path / "out" / "decisions.jsonl").read_text().splitlines()]
    assert len(decisions) == 4
    meta = json.loads((tmp_path / "out" / "decisions.meta.json").read_text())
    assert meta["sentiment_agreement"] == 1.0


def test_build_aux_then_schedule_is_deterministic(tmp_path):
    corpus_path = _write_corpus(tmp_path)
    config = _write_config(tmp_path)
    base = ["--config", str(config)]
    assert run_command(base + ["build-aux", "--corpus", str(corpus_path)]) == 0
    aux_path = tmp_path / "out" / "aux_supervision.jsonl"
    assert aux_path.exists()
    meta = json.loads(aux_path.with_suffix(".meta.json").read_text())
    assert meta["counts"]["retained"] == 18  # 6 samples x 3 modalities

    m1 = tmp_path / "m1.jsonl"
    m2 = tmp_path / "m2.jsonl"
    for out in (m1, m2):
        assert run_command(base + [
            "schedule", "--corpus", str(corpus_path), "--aux", str(aux_path),
            "--strategy", "hybrid", "--seed", "7", "--steps", "40",
            "--out", str(out),
        ]) == 0
    assert m1.read_bytes() == m2.read_bytes()


def test_build_aux_unreachable_endpoint_names_gateway_stage(tmp_path, capsys):
    corpus_path = _write_corpus(tmp_path, n=2)
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({
        "output_dir": str(tmp_path / "out"),
        "gateway": {"transport": "http", "base_url": "http://127.0.0.1:9",
                    "max_attempts": 2, "backoff_s": 0.0},
        "constructor": {"max_attempts": 2},
    }), encoding="utf-8")
    status = run_command(["--config", str(config_path), "build-aux",
                          "--corpus", str(corpus_path)])
    assert status != 0
    error = json.loads(capsys.readouterr().err.strip())
    assert error["error"]["stage"] == "gateway"


def test_runspec_defaults_and_override(tmp_path, capsys):
    config = _write_config(tmp_path)
    out = tmp_path / "out" / "runspec.json"
    assert run_command(["--config", str(config), "runspec"]) == 0
    spec = json.loads(out.read_text())
    assert spec["lora"]["rank"] == 8
    assert spec["optimizer"]["lr"] == 5e-5
    assert spec["provenance"]["config_hash"]

    assert run_command(["--config", str(config), "runspec", "--lr", "1e-4"]) == 0
    spec2 = json.loads(out.read_text())
    assert spec2["optimizer"]["lr"] == 1e-4
    assert spec2["lora"] == spec["lora"]
    assert spec2["epochs"] == spec["epochs"]


def test_predict_evaluate_report_flow(tmp_path, capsys):
    corpus_path = _write_corpus(tmp_path, split="test")
    config = _write_config(tmp_path)
    base = ["--config", str(config)]
    assert run_command(base + ["predict", "--corpus", str(corpus_path),
                               "--split", "test", "--task", "sentiment"]) == 0
    preds = tmp_path / "out" / "predictions_sentiment_test.jsonl"
    assert len(preds.read_text().splitlines()) == 6

    assert run_command(base + ["evaluate", "--corpus", str(corpus_path),
                               "--predictions", str(preds),
                               "--split", "test", "--task", "sentiment"]) == 0
    metrics_path = tmp_path / "out" / "metrics_sentiment_test.json"
    metrics = json.loads(metrics_path.read_text())
    assert metrics["accuracy"] == 1.0  # mock echoes the gold label
    assert metrics["config_hash"]

    assert run_command(base + ["report", str(metrics_path), "--names", "Mock"]) == 0
    text = (tmp_path / "out" / "report.txt").read_text()
    assert "Mock" in text
    assert "1.000" in text
    assert (tmp_path / "out" / "report.csv").exists()


def test_unknown_command_returns_usage_error(tmp_path):
    assert run_command(["frobnicate"]) == 2


def test_missing_config_input_is_reported(tmp_path, capsys):
    status = run_command(["schedule", "--corpus", "nope.jsonl"])
    assert status == 1
    error = json.loads(capsys.readouterr().err.strip())
    assert error["error"]["stage"] in ("schedule", "corpus")


def test_commands_never_mutate_inputs(tmp_path):
    corpus_path = _write_corpus(tmp_path)
    before = corpus_path.read_bytes()
    config = _write_config(tmp_path)
    run_command(["--config", str(config), "validate", "--corpus", str(corpus_path)])
    run_command(["--config", str(config), "build-aux", "--corpus", str(corpus_path)])
    assert corpus_path.read_bytes() == before
