"""Shared fixtures and factories for the test suite."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from emopipe.corpus import Corpus, Sample


def make_sample(i: int, speaker: str | None = None, split: str = "train",
                sentiment: str = "neutral", emotion: str = "neutral",
                tmp_path: Path | None = None, channels: dict | None = None) -> Sample:
    """One fully populated sample; media files are created when tmp_path is given."""
    audio = video = None
    if tmp_path is not None:
        audio = str(tmp_path / f"seg_{i:03d}.wav")
        video = str(tmp_path / f"seg_{i:03d}.mp4")
        Path(audio).write_bytes(b"RIFFfake")
        Path(video).write_bytes(b"\x00\x00fake")
    sentiment_gt = {"multimodal": sentiment, "text": sentiment,
                    "audio": sentiment, "visual": sentiment}
    if channels is not None:
        sentiment_gt = {"multimodal": sentiment, **channels}
    return Sample(
        id=f"seg_{i:03d}",
        speaker_id=speaker or f"spk_{i:03d}",
        split=split,
        sentiment_gt=sentiment_gt,
        gender="female" if i % 2 else "male",
        topic="sharing",
        transcript=f"contoh kalimat nomor {i}",
        audio_path=audio,
        video_path=video,
        duration_s=4.0 + i * 0.25,
        emotion_gt=emotion,
    )


def make_corpus(n: int, tmp_path: Path | None = None, split: str = "train",
                n_speakers: int | None = None) -> Corpus:
    speakers = n_speakers or n
    samples = [
        make_sample(i, speaker=f"spk_{i % speakers:03d}", split=split,
                    tmp_path=tmp_path)
        for i in range(n)
    ]
    return Corpus(samples=tuple(samples), name="synthetic")


def write_jsonl(path: Path, records) -> Path:
    path.write_text(
        "\n".join(json.dumps(r, ensure_ascii=False) for r in records) + "\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture
def media_sample(tmp_path):
    return make_sample(1, tmp_path=tmp_path)
