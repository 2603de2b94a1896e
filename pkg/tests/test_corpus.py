"""Corpus loading, validation, serialization round-trips, and splitting."""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import replace

import pytest

from emopipe.corpus import (
    Corpus,
    CorpusError,
    dump_corpus,
    load_corpus,
    sample_to_record,
    split_corpus,
    validate_corpus,
)

from conftest import make_corpus, make_sample, write_jsonl


def _record(i, **overrides):
    base = {
        "id": f"seg_{i:03d}",
        "speaker_id": f"spk_{i:03d}",
        "gender": "female",
        "topic": "family",
        "transcript": f"kalimat {i}",
        "duration_s": 3.5,
        "sentiment_gt": {"multimodal": "neutral", "text": "neutral"},
        "split": "train",
    }
    base.update(overrides)
    return base


def test_load_preserves_line_order(tmp_path):
    path = write_jsonl(tmp_path / "c.jsonl", [_record(3), _record(1), _record(2)])
    corpus = load_corpus(path)
    assert [s.id for s in corpus.samples] == ["seg_003", "seg_001", "seg_002"]
    assert corpus.name == "c"


def test_load_rejects_duplicate_id(tmp_path):
    records = [_record(7), _record(8, id="seg_007")]
    path = write_jsonl(tmp_path / "c.jsonl", records)
    with pytest.raises(CorpusError, match="seg_007"):
        load_corpus(path)


def test_load_rejects_non_canonical_gold_label(tmp_path):
    bad = _record(1, sentiment_gt={"multimodal": "positif"})
    path = write_jsonl(tmp_path / "c.jsonl", [bad])
    with pytest.raises(CorpusError, match="negative.*neutral.*positive"):
        load_corpus(path)


def test_load_reports_line_number_of_malformed_json(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(json.dumps(_record(1)) + "\n{not json\n", encoding="utf-8")
    with pytest.raises(CorpusError, match="line 2"):
        load_corpus(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(CorpusError, match="cannot read"):
        load_corpus(tmp_path / "absent.jsonl")


def test_unknown_fields_survive_round_trip(tmp_path):
    record = _record(1, feature_path="feats/seg_001.npy", fps=25)
    path = write_jsonl(tmp_path / "c.jsonl", [record])
    corpus = load_corpus(path)
    assert corpus.samples[0].extra == {"feature_path": "feats/seg_001.npy", "fps": 25}
    out = sample_to_record(corpus.samples[0])
    assert out["feature_path"] == "feats/seg_001.npy"
    assert out["fps"] == 25


def test_dump_load_is_a_fixed_point(tmp_path):
    corpus = make_corpus(6, tmp_path=tmp_path)
    first = tmp_path / "a.jsonl"
    second = tmp_path / "b.jsonl"
    dump_corpus(corpus, first)
    dump_corpus(load_corpus(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_validate_flags_negative_duration():
    good = make_sample(1)
    bad = replace(make_sample(2), duration_s=-1.0)
    report = validate_corpus(Corpus(samples=(good, bad)))
    assert len(report.errors) == 1
    assert report.errors[0][0] == "seg_002"
    assert report.errors[0][1] == "duration_s"


def test_validate_counts_match_brute_force():
    samples = (
        make_sample(1, split="train"),
        make_sample(2, split="train"),
        make_sample(3, split="test"),
    )
    report = validate_corpus(Corpus(samples=samples))
    assert report.counts["per_split"] == {"train": 2, "val": 0, "test": 1}


def test_validate_empty_corpus():
    report = validate_corpus(Corpus(samples=()))
    assert report.errors == []
    assert sum(report.counts["per_split"].values()) == 0
    assert sum(report.counts["per_emotion"].values()) == 0


def test_validate_requires_transcript_for_text_channel():
    sample = replace(make_sample(1), transcript="")
    report = validate_corpus(Corpus(samples=(sample,)))
    assert any(f == "transcript" for _, f, _ in report.errors)


def test_validate_error_count_matches_independent_checker():
    # Corrupt random fields and compare against a direct recount.
    rng = random.Random(11)
    samples = []
    expected_errors = 0
    for i in range(40):
        sample = make_sample(i, split="train")
        roll = rng.random()
        if roll < 0.25:
            sample = replace(sample, duration_s=-rng.random())
            expected_errors += 1
        elif roll < 0.4:
            sample = replace(sample, transcript="")
            expected_errors += 1  # text channel labeled, transcript empty
        samples.append(sample)
    report = validate_corpus(Corpus(samples=tuple(samples)))
    assert len(report.errors) == expected_errors


def test_split_is_speaker_disjoint_and_sized():
    corpus = make_corpus(10, n_speakers=10)
    out = split_corpus(corpus, (0.8, 0.1, 0.1), seed=1)
    by_split = Counter(s.split for s in out.samples)
    assert by_split == {"train": 8, "val": 1, "test": 1}


def test_split_never_divides_a_speaker():
    # 20 samples over 7 speakers; every speaker must land in one split.
    corpus = make_corpus(20, n_speakers=7)
    for seed in range(5):
        out = split_corpus(corpus, (0.6, 0.2, 0.2), seed=seed)
        speaker_splits = {}
        for sample in out.samples:
            speaker_splits.setdefault(sample.speaker_id, set()).add(sample.split)
        assert all(len(splits) == 1 for splits in speaker_splits.values())


def test_split_deterministic_for_fixed_seed():
    corpus = make_corpus(10, n_speakers=10)
    a = split_corpus(corpus, (0.8, 0.1, 0.1), seed=42)
    b = split_corpus(corpus, (0.8, 0.1, 0.1), seed=42)
    assert [s.split for s in a.samples] == [s.split for s in b.samples]


def test_split_degenerate_ratio_puts_everything_in_train():
    corpus = make_corpus(5, n_speakers=5, split="test")
    out = split_corpus(corpus, (1.0, 0.0, 0.0), seed=0)
    assert all(s.split == "train" for s in out.samples)


def test_split_needs_three_speakers_for_three_way():
    corpus = make_corpus(4, n_speakers=2)
    with pytest.raises(CorpusError, match="3 distinct speakers"):
        split_corpus(corpus, (0.5, 0.25, 0.25), seed=0)


def test_split_rejects_bad_ratios():
    corpus = make_corpus(5)
    with pytest.raises(CorpusError, match="sum to 1"):
        split_corpus(corpus, (0.5, 0.2, 0.2), seed=0)
    with pytest.raises(CorpusError, match="nonnegative"):
        split_corpus(corpus, (1.2, -0.1, -0.1), seed=0)


def test_split_speaker_counts_within_one_of_targets():
    corpus = make_corpus(30, n_speakers=13)
    ratios = (0.7, 0.15, 0.15)
    out = split_corpus(corpus, ratios, seed=3)
    speakers_per_split = Counter()
    seen = set()
    for sample in out.samples:
        if sample.speaker_id not in seen:
            seen.add(sample.speaker_id)
            speakers_per_split[sample.split] += 1
    for split, ratio in zip(("train", "val", "test"), ratios):
        assert abs(speakers_per_split[split] - 13 * ratio) <= 1
