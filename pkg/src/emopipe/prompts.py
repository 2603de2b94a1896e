"""Render instruction templates into prompt bundles with media attachments.

The template resource files under ``templates/`` are the only place
instruction wording lives; downstream modules never manufacture prompt
text. Templates use ``string.Template`` placeholders ($transcript,
$language, $constraint, $audio, $visual) and are hashed as a set so every
emitted manifest records exactly which wording produced each target.
"""

from __future__ import annotations

import enum
import string
from dataclasses import dataclass, field
from importlib import resources

from .hashing import stable_hash
from .labels import SENTIMENTS


class InstructionType(enum.Enum):
    AUX_TEXT = "aux_text"
    AUX_AUDIO = "aux_audio"
    AUX_VISUAL = "aux_visual"
    MAIN_SENTIMENT = "main_sentiment"
    MAIN_EMOTION = "main_emotion"


AUX_TYPES = (
    InstructionType.AUX_TEXT,
    InstructionType.AUX_AUDIO,
    InstructionType.AUX_VISUAL,
)
MAIN_TYPES = (InstructionType.MAIN_SENTIMENT, InstructionType.MAIN_EMOTION)

# Modality name <-> auxiliary instruction type.
MODALITY_TO_TYPE = {
    "text": InstructionType.AUX_TEXT,
    "audio": InstructionType.AUX_AUDIO,
    "visual": InstructionType.AUX_VISUAL,
}

# Markers substituted for media placeholders inside the instruction text;
# the actual file reference travels in the attachments list.
_AUDIO_MARKER = "[attached audio]"
_VIDEO_MARKER = "[attached video]"

_TEMPLATE_NAMES = (
    "aux_text",
    "aux_text_constrained",
    "aux_audio",
    "aux_audio_constrained",
    "aux_visual",
    "aux_visual_constrained",
    "main_sentiment",
    "main_emotion",
)


class PromptError(ValueError):
    pass


@dataclass(frozen=True)
class PromptBundle:
    instruction_text: str
    attachments: tuple          # of (kind, path), kind in {"audio", "video"}
    expected_schema: str        # instruction type value, e.g. "aux_text"
    sample_id: str
    constraint: str | None = None

    def to_record(self) -> dict:
        return {
            "instruction_text": self.instruction_text,
            "attachments": [list(a) for a in self.attachments],
            "expected_schema": self.expected_schema,
            "sample_id": self.sample_id,
            "constraint": self.constraint,
        }


def _load_templates() -> dict:
    templates = {}
    root = resources.files(__package__) / "templates"
    for name in _TEMPLATE_NAMES:
        templates[name] = (root / f"{name}.txt").read_text(encoding="utf-8")
    return templates


_TEMPLATES = _load_templates()


def template_set_hash() -> str:
    """Version hash over the full template set, surfaced in manifests."""
    return stable_hash({name: _TEMPLATES[name] for name in _TEMPLATE_NAMES})


def _require(sample, field_name: str, t: InstructionType):
    value = getattr(sample, field_name)
    if not value:
        raise PromptError(
            f"sample {sample.id!r} lacks {field_name}, required by {t.value}"
        )
    return value


def render_prompt(sample, t: InstructionType, constraint: str | None = None,
                  language: str = "Indonesian") -> PromptBundle:
    """Substitute one sample into the canonical template for ``t``.

    ``constraint`` switches auxiliary templates to the variant that fixes
    the sentiment label and asks only for a justification; it is not
    defined for main-task types. Rendering is deterministic.
    """
    if constraint is not None:
        if t in MAIN_TYPES:
            raise PromptError(f"constraint is not defined for {t.value}")
        if constraint not in SENTIMENTS:
            raise PromptError(f"constraint {constraint!r} not in {SENTIMENTS}")

    fields = {"language": language, "constraint": constraint or ""}
    attachments = []

    if t in (InstructionType.AUX_TEXT, *MAIN_TYPES):
        fields["transcript"] = _require(sample, "transcript", t)
    if t in (InstructionType.AUX_AUDIO, *MAIN_TYPES):
        _require(sample, "audio_path", t)
        attachments.append(("audio", sample.audio_path))
        fields["audio"] = _AUDIO_MARKER
    if t in (InstructionType.AUX_VISUAL, *MAIN_TYPES):
        _require(sample, "video_path", t)
        attachments.append(("video", sample.video_path))
        fields["visual"] = _VIDEO_MARKER

    name = t.value if constraint is None else f"{t.value}_constrained"
    text = string.Template(_TEMPLATES[name]).substitute(fields)
    return PromptBundle(
        instruction_text=text,
        attachments=tuple(attachments),
        expected_schema=t.value,
        sample_id=sample.id,
        constraint=constraint,
    )
