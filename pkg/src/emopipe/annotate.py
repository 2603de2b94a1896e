"""Aggregate raw annotator records into gold labels and agreement stats.

Sentiment labels come from majority voting over per-annotator votes;
emotion labels come from the highest cumulative Likert score across
annotators. Ties cannot be sent to a human adjudicator here, so they are
flagged ``needs_adjudication`` and given a deterministic provisional
label: neutral when neutral is among the tied labels, otherwise the
first tied label in the fixed category order.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .labels import EMOTIONS, SENTIMENTS

# The -1/0/+1 annotation scale maps onto the canonical sentiment strings.
_VOTE_SCALE = {-1: "negative", 0: "neutral", 1: "positive"}

_LIKERT_RANGE = (0, 1, 2, 3)


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class SentimentVoteRecord:
    segment_id: str
    annotator_id: str
    vote: str

    def __post_init__(self):
        if self.vote not in SENTIMENTS:
            raise AnnotationError(
                f"vote {self.vote!r} not in {SENTIMENTS} "
                f"(segment {self.segment_id}, annotator {self.annotator_id})"
            )


@dataclass(frozen=True)
class EmotionLikertRecord:
    segment_id: str
    annotator_id: str
    scores: dict

    def __post_init__(self):
        missing = [cat for cat in EMOTIONS if cat not in self.scores]
        if missing:
            raise AnnotationError(
                f"segment {self.segment_id}, annotator {self.annotator_id}: "
                f"missing categories {missing}"
            )
        for cat, score in self.scores.items():
            if cat not in EMOTIONS:
                raise AnnotationError(f"unknown category {cat!r}")
            if score not in _LIKERT_RANGE:
                raise AnnotationError(
                    f"score {score!r} for {cat} outside Likert range {_LIKERT_RANGE}"
                )


@dataclass(frozen=True)
class AggregationDecision:
    segment_id: str
    label: str
    status: str  # "unambiguous" | "needs_adjudication"
    tally: dict


def _check_one_record_per_annotator(records, kind: str):
    seen = {}
    for rec in records:
        if rec.annotator_id in seen and seen[rec.annotator_id] != rec:
            raise AnnotationError(
                f"conflicting duplicate annotator {rec.annotator_id!r} "
                f"in {kind} records for segment {rec.segment_id}"
            )
        if rec.annotator_id in seen:
            raise AnnotationError(
                f"duplicate annotator {rec.annotator_id!r} "
                f"in {kind} records for segment {rec.segment_id}"
            )
        seen[rec.annotator_id] = rec


def _check_single_segment(records):
    segment_ids = {rec.segment_id for rec in records}
    if len(segment_ids) > 1:
        raise AnnotationError(f"records span multiple segments: {sorted(segment_ids)}")


def _break_tie(tied, order) -> str:
    if "neutral" in tied:
        return "neutral"
    return next(label for label in order if label in tied)


def aggregate_sentiment(votes) -> AggregationDecision:
    """Majority vote over one segment's sentiment votes.

    Unambiguous iff the modal label reaches the majority threshold
    ceil((n+1)/2) for n annotators (3 of 5 in the reference protocol).
    Ties are broken toward neutral, then by the fixed sentiment order.
    """
    votes = list(votes)
    if not votes:
        raise AnnotationError("empty vote list")
    _check_single_segment(votes)
    _check_one_record_per_annotator(votes, "sentiment")

    tally = Counter(v.vote for v in votes)
    top = max(tally.values())
    tied = [label for label in tally if tally[label] == top]
    threshold = math.ceil((len(votes) + 1) / 2)
    unambiguous = top >= threshold
    label = tied[0] if len(tied) == 1 else _break_tie(tied, SENTIMENTS)
    return AggregationDecision(
        segment_id=votes[0].segment_id,
        label=label,
        status="unambiguous" if unambiguous else "needs_adjudication",
        tally={lab: tally.get(lab, 0) for lab in SENTIMENTS},
    )


def aggregate_emotion(records) -> AggregationDecision:
    """Highest cumulative Likert score over one segment's emotion ratings.

    Unambiguous iff the argmax of the column sums is unique; ties are
    broken toward neutral, then by the fixed category order.
    """
    records = list(records)
    if not records:
        raise AnnotationError("empty record list")
    _check_single_segment(records)
    _check_one_record_per_annotator(records, "emotion")

    tally = {cat: sum(rec.scores[cat] for rec in records) for cat in EMOTIONS}
    top = max(tally.values())
    tied = [cat for cat in EMOTIONS if tally[cat] == top]
    label = tied[0] if len(tied) == 1 else _break_tie(tied, EMOTIONS)
    return AggregationDecision(
        segment_id=records[0].segment_id,
        label=label,
        status="unambiguous" if len(tied) == 1 else "needs_adjudication",
        tally=tally,
    )


def agreement_rate(decisions) -> float:
    """Fraction of decisions that are unambiguous."""
    decisions = list(decisions)
    if not decisions:
        raise AnnotationError("empty decision list")
    return sum(1 for d in decisions if d.status == "unambiguous") / len(decisions)


def load_annotation_records(path):
    """Read line-delimited annotation records, splitting by phase.

    Each line is {segment_id, annotator_id, phase: "sentiment"|"emotion",
    vote?, scores?}. Integer votes on the -1/0/+1 scale are mapped to the
    canonical strings. Returns (sentiment_votes, emotion_records).
    """
    votes, likerts = [], []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AnnotationError(f"line {line_no}: invalid JSON: {exc}") from exc
        phase = record.get("phase")
        if phase == "sentiment":
            vote = record.get("vote")
            if isinstance(vote, int) and not isinstance(vote, bool):
                vote = _VOTE_SCALE.get(vote, vote)
            votes.append(
                SentimentVoteRecord(
                    segment_id=record["segment_id"],
                    annotator_id=record["annotator_id"],
                    vote=vote,
                )
            )
        elif phase == "emotion":
            likerts.append(
                EmotionLikertRecord(
                    segment_id=record["segment_id"],
                    annotator_id=record["annotator_id"],
                    scores=record["scores"],
                )
            )
        else:
            raise AnnotationError(f"line {line_no}: unknown phase {phase!r}")
    return votes, likerts


def aggregate_all(votes, likerts):
    """Group records by segment and aggregate each phase.

    Returns (sentiment_decisions, emotion_decisions) ordered by segment id.
    """
    by_segment_votes = {}
    for vote in votes:
        by_segment_votes.setdefault(vote.segment_id, []).append(vote)
    by_segment_likerts = {}
    for rec in likerts:
        by_segment_likerts.setdefault(rec.segment_id, []).append(rec)

    sentiment = [
        aggregate_sentiment(by_segment_votes[seg])
        for seg in sorted(by_segment_votes)
    ]
    emotion = [
        aggregate_emotion(by_segment_likerts[seg])
        for seg in sorted(by_segment_likerts)
    ]
    return sentiment, emotion
