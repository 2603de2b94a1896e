"""Extract, repair, and normalize model outputs into typed labels.

Repair scope is deliberately narrow and auditable: code fences,
surrounding prose, single-quoted keys/values, and trailing commas are
tolerated; labels are never guessed semantically. Key matching is
case-insensitive. Parsing never throws; failures fold into
``valid=False`` with machine-readable reason codes:

    no_json_object      no brace-delimited object could be parsed
    missing_key:<Key>   a schema-required key is absent
    invalid_sentiment   Sentiment present but outside the taxonomy
    invalid_emotion     Emotion present but outside the taxonomy
    bad_keywords        Emotion_keywords is not a list of strings
    bad_explanation     Explanation is missing, empty, or not a string
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .labels import EMOTIONS, INVALID, SENTIMENTS
from .prompts import InstructionType

# Indonesian and English surface forms accepted for each canonical label.
_SENTIMENT_SYNONYMS = {
    "positive": "positive",
    "positif": "positive",
    "negative": "negative",
    "negatif": "negative",
    "neutral": "neutral",
    "netral": "neutral",
}

_EMOTION_SYNONYMS = {
    "fear": "fear",
    "ketakutan": "fear",
    "takut": "fear",
    "disgust": "disgust",
    "jijik": "disgust",
    "anger": "anger",
    "kemarahan": "anger",
    "marah": "anger",
    "sadness": "sadness",
    "kesedihan": "sadness",
    "sedih": "sadness",
    "neutral": "neutral",
    "netral": "neutral",
    "happiness": "happiness",
    "kebahagiaan": "happiness",
    "bahagia": "happiness",
    "surprise": "surprise",
    "terkejut": "surprise",
}

# Schema-required keys per instruction type.
_SCHEMA_KEYS = {
    InstructionType.AUX_TEXT: ("Sentiment", "Emotion_keywords", "Explanation"),
    InstructionType.AUX_AUDIO: ("Sentiment", "Explanation"),
    InstructionType.AUX_VISUAL: ("Sentiment", "Explanation"),
    InstructionType.MAIN_SENTIMENT: ("Sentiment",),
    InstructionType.MAIN_EMOTION: ("Sentiment", "Emotion"),
}

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*")
_TRAILING_COMMA_RE = re.compile(r",(\s*[}\]])")


class ExtractionError(ValueError):
    """No parseable JSON object found in the raw text."""


@dataclass
class ParsedOutput:
    sentiment: str = INVALID
    emotion: str | None = None
    keywords: list | None = None
    explanation: str | None = None
    valid: bool = False
    raw: str = ""
    reasons: list = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "sentiment": self.sentiment,
            "emotion": self.emotion,
            "keywords": self.keywords,
            "explanation": self.explanation,
            "valid": self.valid,
            "raw": self.raw,
            "reasons": list(self.reasons),
        }

    @staticmethod
    def from_record(record: dict) -> "ParsedOutput":
        return ParsedOutput(
            sentiment=record.get("sentiment", INVALID),
            emotion=record.get("emotion"),
            keywords=record.get("keywords"),
            explanation=record.get("explanation"),
            valid=bool(record.get("valid", False)),
            raw=record.get("raw", ""),
            reasons=list(record.get("reasons", [])),
        )


def _candidate_objects(text: str):
    """Yield balanced {...} spans in order of appearance.

    Only double quotes delimit strings while scanning: apostrophes are
    ordinary prose characters, otherwise "here's {..}" would swallow the
    object. Braces are only tracked once an opening brace has been seen.
    """
    depth = 0
    start = None
    in_string = False
    escape = False
    for i, ch in enumerate(text):
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"' and depth > 0:
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0:
                yield text[start:i + 1]


def _repair(fragment: str) -> str:
    fragment = _TRAILING_COMMA_RE.sub(r"\1", fragment)
    return fragment


def _requote(fragment: str) -> str:
    # Last-resort single-quote repair; only used when strict parsing failed.
    return _repair(fragment.replace("'", '"'))


def extract_json(raw: str) -> dict:
    """Return the first well-formed object after stripping fences and prose.

    Raises ExtractionError when no object can be recovered.
    """
    cleaned = _FENCE_RE.sub("", raw)
    for fragment in _candidate_objects(cleaned):
        for attempt in (fragment, _repair(fragment), _requote(fragment)):
            try:
                value = json.loads(attempt)
            except json.JSONDecodeError:
                continue
            if isinstance(value, dict):
                return value
    raise ExtractionError("no JSON object found in output")


def normalize_sentiment(s) -> str:
    """Map a raw sentiment string to the canonical 3-class set or INVALID."""
    if not isinstance(s, str):
        return INVALID
    key = s.strip().strip(".,;:!?\"'` ").lower()
    return _SENTIMENT_SYNONYMS.get(key, INVALID)


def normalize_emotion(s) -> str:
    """Map a raw emotion string to the canonical 7-class set or INVALID."""
    if not isinstance(s, str):
        return INVALID
    key = s.strip().strip(".,;:!?\"'` ").lower()
    return _EMOTION_SYNONYMS.get(key, INVALID)


def _lookup(obj: dict, key: str):
    """Case-insensitive key lookup; returns (found, value)."""
    lowered = key.lower()
    for k, v in obj.items():
        if isinstance(k, str) and k.lower() == lowered:
            return True, v
    return False, None


def parse_output(t: InstructionType, raw: str) -> ParsedOutput:
    """Parse one raw completion against the schema for instruction type ``t``.

    Never raises; partial results are preserved and ``valid`` reflects
    full schema conformance.
    """
    out = ParsedOutput(raw=raw)
    try:
        obj = extract_json(raw)
    except ExtractionError:
        out.reasons.append("no_json_object")
        return out

    required = _SCHEMA_KEYS[t]

    found, value = _lookup(obj, "Sentiment")
    if not found:
        out.reasons.append("missing_key:Sentiment")
    else:
        out.sentiment = normalize_sentiment(value)
        if out.sentiment == INVALID:
            out.reasons.append("invalid_sentiment")

    if "Emotion" in required:
        found, value = _lookup(obj, "Emotion")
        if not found:
            out.reasons.append("missing_key:Emotion")
        else:
            out.emotion = normalize_emotion(value)
            if out.emotion == INVALID:
                out.reasons.append("invalid_emotion")

    if "Emotion_keywords" in required:
        found, value = _lookup(obj, "Emotion_keywords")
        if not found:
            out.reasons.append("missing_key:Emotion_keywords")
        elif not isinstance(value, list) or any(not isinstance(x, str) for x in value):
            out.reasons.append("bad_keywords")
        else:
            out.keywords = value

    if "Explanation" in required:
        found, value = _lookup(obj, "Explanation")
        if not found:
            out.reasons.append("missing_key:Explanation")
        elif not isinstance(value, str) or not value.strip():
            out.reasons.append("bad_explanation")
        else:
            out.explanation = value
    else:
        # Keep a well-formed explanation even when the schema doesn't demand it.
        found, value = _lookup(obj, "Explanation")
        if found and isinstance(value, str) and value.strip():
            out.explanation = value

    out.valid = not out.reasons
    return out
