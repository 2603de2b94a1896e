"""Hand a pipeline-emitted manifest and run spec to the trainer package.

Requires the companion ``adaptrain`` package (``pip install -e trainer/``).
The trainer consumes the manifest and run-spec files verbatim; nothing
else crosses the package boundary.
"""

import json
import tempfile
from pathlib import Path

from emopipe.cli import run_command

from adaptrain import ByteTokenizer, TinyCausalLM, train
from adaptrain.manifest import load_manifest, load_runspec

workdir = Path(tempfile.mkdtemp(prefix="emopipe_demo_"))
out_dir = workdir / "out"

records, script = [], {}
for i in range(6):
    sentiment = ["negative", "neutral", "positive"][i % 3]
    audio = workdir / f"a{i}.wav"
    video = workdir / f"v{i}.mp4"
    audio.write_bytes(b"x")
    video.write_bytes(b"x")
    records.append({
        "id": f"seg_{i:03d}", "speaker_id": f"spk_{i % 3}",
        "transcript": f"kalimat nomor {i}", "duration_s": 4.0,
        "audio_path": str(audio), "video_path": str(video),
        "sentiment_gt": {"multimodal": sentiment, "text": sentiment},
        "split": "train",
    })
    script[f"seg_{i:03d}|aux_text"] = json.dumps({
        "Sentiment": sentiment, "Emotion_keywords": ["kata"],
        "Explanation": "sesuai label"})

corpus_path = workdir / "corpus.jsonl"
corpus_path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
mock_path = workdir / "mock.json"
mock_path.write_text(json.dumps(script))
config_path = workdir / "config.json"
config_path.write_text(json.dumps({
    "output_dir": str(out_dir),
    "gateway": {"transport": "mock", "mock_script": str(mock_path)},
    "schedule": {"mix_weights": {"aux_text": 0.5, "main": 0.5}},
}))

base = ["--config", str(config_path)]
assert run_command(base + ["build-aux", "--corpus", str(corpus_path),
                           "--modalities", "text"]) == 0
assert run_command(base + ["schedule", "--corpus", str(corpus_path),
                           "--aux", str(out_dir / "aux_supervision.jsonl"),
                           "--strategy", "hybrid", "--steps", "24",
                           "--seed", "3"]) == 0
assert run_command(base + ["runspec"]) == 0

# Desk-scale overrides: tiny backbone, so adapt only the blocks it has and
# use a toy-friendly learning rate.
runspec = load_runspec(out_dir / "runspec.json")
runspec["lora"]["targets"] = ["text_encoder.attn", "thinker.attn", "lm_head"]
runspec["optimizer"]["lr"] = 0.01
runspec["batch"]["grad_accum"] = 1

header, entries = load_manifest(out_dir / "training_manifest.jsonl")
print(f"manifest: {len(entries)} entries, strategy={header['strategy']}")

model = TinyCausalLM(seed=0)
result = train(runspec, entries, model, ByteTokenizer(),
               out_dir=out_dir / "train", max_steps=60)
print(f"adapted modules: {len(result.adapted_modules)}")
print(f"loss: {result.initial_loss:.3f} -> {result.final_loss:.3f} "
      f"over {len(result.losses)} steps")
print(f"checkpoint: {result.checkpoint_path}")
print(f"loss curve: {result.loss_curve_path}")
