"""Emit multi-stage and hybrid training manifests plus the run spec."""

import json
import tempfile
from collections import Counter
from pathlib import Path

from emopipe.corpus import Corpus, Sample
from emopipe.gateway import Gateway, MockTransport
from emopipe.schedule import (
    SchedulePlan,
    emit_runspec,
    plan_hybrid,
    plan_multistage,
    runspec_to_json,
    uniform_mix,
)
from emopipe.supervision import ConstructorConfig, build_supervision

workdir = Path(tempfile.mkdtemp(prefix="emopipe_demo_"))

samples = []
for i in range(8):
    audio = workdir / f"a{i}.wav"
    video = workdir / f"v{i}.mp4"
    audio.write_bytes(b"x")
    video.write_bytes(b"x")
    samples.append(Sample(
        id=f"seg_{i:03d}", speaker_id=f"spk_{i % 4}", split="train",
        sentiment_gt={"multimodal": "neutral", "text": "neutral"},
        transcript=f"kalimat {i}", emotion_gt="neutral",
        audio_path=str(audio), video_path=str(video),
    ))
corpus = Corpus(samples=tuple(samples))

script = {"aux_text": json.dumps({"Sentiment": "neutral",
                                  "Emotion_keywords": [], "Explanation": "netral"})}
gateway = Gateway(MockTransport(script), sleep=lambda s: None)
aux = build_supervision(corpus, ["text"], gateway, workdir / "cache.jsonl",
                        ConstructorConfig())

staged = plan_multistage(corpus, aux, SchedulePlan(
    strategy="multi_stage", total_steps=10, t0=4, seed=7))
print("multi-stage schedule (t0=4):")
for entry in staged.entries:
    print(f"  step {entry.step:2d}: {entry.instruction_type}")

mixed = plan_hybrid(corpus, aux, SchedulePlan(
    strategy="hybrid", total_steps=2000,
    mix_weights={"aux_text": 0.5, "main": 0.5}, seed=7))
counts = Counter(e.instruction_type for e in mixed.entries)
print("\nhybrid empirical mix over 2000 steps:",
      {k: round(v / 2000, 3) for k, v in sorted(counts.items())})

manifest_path = workdir / "manifest.jsonl"
staged.write(manifest_path)
print(f"\nmanifest written to {manifest_path}")
print("header:", json.dumps(staged.header, sort_keys=True)[:120], "...")

spec = emit_runspec(provenance={"manifest_path": str(manifest_path)})
print("\nrun spec:")
print(runspec_to_json(spec))
