"""Render the instruction templates and parse messy model outputs."""

import tempfile
from pathlib import Path

from emopipe.corpus import Sample
from emopipe.outparse import parse_output
from emopipe.prompts import InstructionType, render_prompt, template_set_hash

workdir = Path(tempfile.mkdtemp(prefix="emopipe_demo_"))
audio = workdir / "seg.wav"
video = workdir / "seg.mp4"
audio.write_bytes(b"fake")
video.write_bytes(b"fake")

sample = Sample(
    id="seg_001",
    speaker_id="spk_01",
    split="train",
    sentiment_gt={"multimodal": "negative", "text": "negative"},
    transcript="aku lagi galau banget hari ini",
    audio_path=str(audio),
    video_path=str(video),
)

print("template set hash:", template_set_hash()[:16], "...\n")

for itype in InstructionType:
    bundle = render_prompt(sample, itype)
    kinds = [kind for kind, _ in bundle.attachments]
    print(f"--- {itype.value} (attachments: {kinds or 'none'}) ---")
    print(bundle.instruction_text.splitlines()[0])

constrained = render_prompt(sample, InstructionType.AUX_TEXT, constraint="negative")
print("\nconstrained variant asks for a justification only:")
print([line for line in constrained.instruction_text.splitlines()
       if "known to be" in line][0])

messy_outputs = [
    '```json\n{"Sentiment": "negatif", "Emotion_keywords": ["galau"], '
    '"Explanation": "kata galau menunjukkan kesedihan"}\n```',
    "Here you go: {'Sentiment': 'positive'}",
    "Sentiment: positive (no JSON)",
]
print("\nparsing messy outputs:")
for raw in messy_outputs:
    parsed = parse_output(InstructionType.AUX_TEXT, raw)
    print(f"  valid={parsed.valid!s:5}  sentiment={parsed.sentiment:8}  "
          f"reasons={parsed.reasons}")
