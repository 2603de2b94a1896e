"""Corpus manifests: loading, validation, and speaker-disjoint splitting.

A corpus manifest is UTF-8 JSONL, one sample object per line. Gold labels in
manifests must already be canonical enum strings; lexical normalization (for
example Indonesian synonyms) applies only to model outputs, never to gold
data. Canonical serialization order is::

    id, speaker_id, gender, topic, transcript, audio_path, video_path,
    duration_s, sentiment_gt, emotion_gt, split, <unknown fields sorted>

``sentiment_gt`` is an object with keys among {multimodal, text, audio,
visual} in that order; absent channels are omitted, never null. Optional
fields (audio_path, video_path, emotion_gt) are omitted when missing.
Unknown extra fields are preserved verbatim so externally shaped exports
survive a round trip.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

from .hashing import stable_hash
from .labels import EMOTIONS, GENDERS, SENTIMENTS, SPLITS

SENTIMENT_CHANNELS = ("multimodal", "text", "audio", "visual")

_CANONICAL_FIELDS = (
    "id",
    "speaker_id",
    "gender",
    "topic",
    "transcript",
    "audio_path",
    "video_path",
    "duration_s",
    "sentiment_gt",
    "emotion_gt",
    "split",
)


class CorpusError(ValueError):
    """Raised for unreadable or structurally broken manifests."""


@dataclass(frozen=True)
class Sample:
    """One video segment with modality references and gold labels."""

    id: str
    speaker_id: str
    split: str
    sentiment_gt: dict
    gender: str = "unknown"
    topic: str = ""
    transcript: str = ""
    audio_path: str | None = None
    video_path: str | None = None
    duration_s: float = 0.0
    emotion_gt: str | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Corpus:
    samples: tuple
    name: str = "corpus"
    language_tag: str = "ind"

    def __len__(self) -> int:
        return len(self.samples)

    def by_split(self, split: str) -> list:
        return [s for s in self.samples if s.split == split]

    def speakers(self) -> list:
        return sorted({s.speaker_id for s in self.samples})

    def content_hash(self) -> str:
        return stable_hash([sample_to_record(s) for s in self.samples])


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)    # (sample_id, field, message)
    warnings: list = field(default_factory=list)  # (sample_id, field, message)
    counts: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors


def _parse_sentiment_gt(value, line_no: int) -> dict:
    if not isinstance(value, dict):
        raise CorpusError(f"line {line_no}: sentiment_gt must be an object")
    parsed = {}
    for channel, label in value.items():
        if channel not in SENTIMENT_CHANNELS:
            raise CorpusError(
                f"line {line_no}: unknown sentiment channel {channel!r}; "
                f"expected one of {SENTIMENT_CHANNELS}"
            )
        if label not in SENTIMENTS:
            raise CorpusError(
                f"line {line_no}: sentiment_gt.{channel} is {label!r}; "
                f"gold labels must be canonical, one of {SENTIMENTS}"
            )
        parsed[channel] = label
    if "multimodal" not in parsed:
        raise CorpusError(f"line {line_no}: sentiment_gt.multimodal is required")
    return parsed


def sample_from_record(record: dict, line_no: int = 0) -> Sample:
    """Build a Sample from one parsed manifest object."""
    if not isinstance(record, dict):
        raise CorpusError(f"line {line_no}: manifest line must be an object")
    for name in ("id", "speaker_id", "split", "sentiment_gt"):
        if name not in record:
            raise CorpusError(f"line {line_no}: missing required field {name!r}")

    sample_id = record["id"]
    if not isinstance(sample_id, str) or not sample_id:
        raise CorpusError(f"line {line_no}: id must be a nonempty string")

    split = record["split"]
    if split not in SPLITS:
        raise CorpusError(
            f"line {line_no}: split is {split!r}; expected one of {SPLITS}"
        )

    gender = record.get("gender", "unknown")
    if gender not in GENDERS:
        raise CorpusError(
            f"line {line_no}: gender is {gender!r}; expected one of {GENDERS}"
        )

    emotion_gt = record.get("emotion_gt")
    if emotion_gt is not None and emotion_gt not in EMOTIONS:
        raise CorpusError(
            f"line {line_no}: emotion_gt is {emotion_gt!r}; "
            f"expected one of {EMOTIONS}"
        )

    duration = record.get("duration_s", 0.0)
    if not isinstance(duration, (int, float)) or isinstance(duration, bool):
        raise CorpusError(f"line {line_no}: duration_s must be a number")

    extra = {k: v for k, v in record.items() if k not in _CANONICAL_FIELDS}
    return Sample(
        id=sample_id,
        speaker_id=str(record["speaker_id"]),
        split=split,
        sentiment_gt=_parse_sentiment_gt(record["sentiment_gt"], line_no),
        gender=gender,
        topic=record.get("topic", ""),
        transcript=record.get("transcript", ""),
        audio_path=record.get("audio_path"),
        video_path=record.get("video_path"),
        duration_s=float(duration),
        emotion_gt=emotion_gt,
        extra=extra,
    )


def sample_to_record(sample: Sample) -> dict:
    """Serialize a Sample in canonical field order."""
    record = {
        "id": sample.id,
        "speaker_id": sample.speaker_id,
        "gender": sample.gender,
        "topic": sample.topic,
        "transcript": sample.transcript,
    }
    if sample.audio_path is not None:
        record["audio_path"] = sample.audio_path
    if sample.video_path is not None:
        record["video_path"] = sample.video_path
    record["duration_s"] = sample.duration_s
    record["sentiment_gt"] = {
        ch: sample.sentiment_gt[ch]
        for ch in SENTIMENT_CHANNELS
        if ch in sample.sentiment_gt
    }
    if sample.emotion_gt is not None:
        record["emotion_gt"] = sample.emotion_gt
    record["split"] = sample.split
    for key in sorted(sample.extra):
        record[key] = sample.extra[key]
    return record


def load_corpus(path, name: str | None = None, language_tag: str = "ind") -> Corpus:
    """Load a JSONL manifest; every well-formed line becomes a Sample.

    Raises CorpusError on an unreadable file, a malformed line (reported
    with its line number), or a duplicate sample id.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read manifest {path}: {exc}") from exc

    samples = []
    seen = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {line_no}: invalid JSON: {exc}") from exc
        sample = sample_from_record(record, line_no)
        if sample.id in seen:
            raise CorpusError(
                f"line {line_no}: duplicate id {sample.id!r} "
                f"(first seen on line {seen[sample.id]})"
            )
        seen[sample.id] = line_no
        samples.append(sample)
    return Corpus(
        samples=tuple(samples),
        name=name or path.stem,
        language_tag=language_tag,
    )


def dump_corpus(corpus: Corpus, path) -> None:
    """Write a manifest in canonical form; load(dump(c)) is a fixed point."""
    lines = [json.dumps(sample_to_record(s), ensure_ascii=False) for s in corpus.samples]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Report every invariant violation; problems are reported, not thrown."""
    report = ValidationReport()
    seen_ids = set()
    for sample in corpus.samples:
        sid = sample.id
        if not sid:
            report.errors.append((sid, "id", "id is empty"))
        if sid in seen_ids:
            report.errors.append((sid, "id", "duplicate id"))
        seen_ids.add(sid)
        if sample.duration_s < 0:
            report.errors.append(
                (sid, "duration_s", f"negative duration {sample.duration_s}")
            )
        if sample.split not in SPLITS:
            report.errors.append((sid, "split", f"unknown split {sample.split!r}"))
        if sample.gender not in GENDERS:
            report.errors.append((sid, "gender", f"unknown gender {sample.gender!r}"))
        mm = sample.sentiment_gt.get("multimodal")
        if mm not in SENTIMENTS:
            report.errors.append(
                (sid, "sentiment_gt.multimodal", f"missing or non-canonical: {mm!r}")
            )
        for channel, label in sample.sentiment_gt.items():
            if channel not in SENTIMENT_CHANNELS or label not in SENTIMENTS:
                report.errors.append(
                    (sid, f"sentiment_gt.{channel}", f"non-canonical label {label!r}")
                )
        if sample.emotion_gt is not None and sample.emotion_gt not in EMOTIONS:
            report.errors.append(
                (sid, "emotion_gt", f"non-canonical label {sample.emotion_gt!r}")
            )
        if "text" in sample.sentiment_gt and not sample.transcript:
            report.errors.append(
                (sid, "transcript", "text channel is labeled but transcript is empty")
            )
        if "audio" in sample.sentiment_gt and not sample.audio_path:
            report.warnings.append(
                (sid, "audio_path", "audio channel is labeled but audio_path is missing")
            )
        if "visual" in sample.sentiment_gt and not sample.video_path:
            report.warnings.append(
                (sid, "video_path", "visual channel is labeled but video_path is missing")
            )

    split_counts = Counter(s.split for s in corpus.samples)
    sentiment_counts = Counter(
        s.sentiment_gt.get("multimodal") for s in corpus.samples
        if s.sentiment_gt.get("multimodal") in SENTIMENTS
    )
    emotion_counts = Counter(
        s.emotion_gt for s in corpus.samples if s.emotion_gt in EMOTIONS
    )
    report.counts = {
        "per_split": {split: split_counts.get(split, 0) for split in SPLITS},
        "per_sentiment": {lab: sentiment_counts.get(lab, 0) for lab in SENTIMENTS},
        "per_emotion": {lab: emotion_counts.get(lab, 0) for lab in EMOTIONS},
    }
    return report


def _apportion(total: int, ratios) -> list:
    """Largest-remainder apportionment; each count within 1 of total*ratio."""
    raw = [total * r for r in ratios]
    counts = [math.floor(x) for x in raw]
    remainder = total - sum(counts)
    by_fraction = sorted(
        range(len(ratios)), key=lambda i: (raw[i] - counts[i], -i), reverse=True
    )
    for i in by_fraction[:remainder]:
        counts[i] += 1
    return counts


def split_corpus(corpus: Corpus, ratios, seed: int) -> Corpus:
    """Reassign splits speaker-disjointly; deterministic for a fixed seed.

    All samples of one speaker land in one split, and per-split speaker
    counts stay within one speaker of the ratio targets.
    """
    if len(ratios) != 3:
        raise CorpusError("ratios must be a (train, val, test) triple")
    if any(r < 0 for r in ratios):
        raise CorpusError("ratios must be nonnegative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise CorpusError(f"ratios must sum to 1, got {sum(ratios)}")

    speakers = corpus.speakers()
    if all(r > 0 for r in ratios) and len(speakers) < 3:
        raise CorpusError(
            f"need at least 3 distinct speakers for a 3-way split, got {len(speakers)}"
        )

    rng = random.Random(seed)
    rng.shuffle(speakers)
    counts = _apportion(len(speakers), ratios)
    assignment = {}
    cursor = 0
    for split, count in zip(SPLITS, counts):
        for speaker in speakers[cursor:cursor + count]:
            assignment[speaker] = split
        cursor += count

    samples = tuple(replace(s, split=assignment[s.speaker_id]) for s in corpus.samples)
    return Corpus(samples=samples, name=corpus.name, language_tag=corpus.language_tag)
