"""Drive the whole pipeline through the CLI, offline, in a temp directory.

Mirrors a real run: a corpus manifest and a mock-endpoint script on disk,
then validate -> build-aux -> schedule -> runspec -> predict -> evaluate
-> report through the command surface.
"""

import json
import tempfile
from pathlib import Path

from emopipe.cli import run_command

workdir = Path(tempfile.mkdtemp(prefix="emopipe_demo_"))
out_dir = workdir / "out"

records, script = [], {}
for i in range(9):
    sentiment = ["negative", "neutral", "positive"][i % 3]
    emotion = {"negative": "sadness", "neutral": "neutral",
               "positive": "happiness"}[sentiment]
    audio = workdir / f"a{i}.wav"
    video = workdir / f"v{i}.mp4"
    audio.write_bytes(b"x")
    video.write_bytes(b"x")
    records.append({
        "id": f"seg_{i:03d}", "speaker_id": f"spk_{i % 4}",
        "transcript": f"kalimat {i}", "duration_s": 5.0,
        "audio_path": str(audio), "video_path": str(video),
        "sentiment_gt": {"multimodal": sentiment, "text": sentiment,
                         "audio": sentiment, "visual": sentiment},
        "emotion_gt": emotion, "split": "train" if i < 6 else "test",
    })
    script[f"seg_{i:03d}|main_sentiment"] = json.dumps({"Sentiment": sentiment})
    script[f"seg_{i:03d}|aux_text"] = json.dumps({
        "Sentiment": sentiment, "Emotion_keywords": ["kata"],
        "Explanation": "sesuai"})
    script[f"seg_{i:03d}|aux_audio"] = json.dumps(
        {"Sentiment": sentiment, "Explanation": "nada"})
    script[f"seg_{i:03d}|aux_visual"] = json.dumps(
        {"Sentiment": sentiment, "Explanation": "wajah"})

corpus_path = workdir / "corpus.jsonl"
corpus_path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
mock_path = workdir / "mock.json"
mock_path.write_text(json.dumps(script))
config_path = workdir / "config.json"
config_path.write_text(json.dumps({
    "output_dir": str(out_dir),
    "gateway": {"transport": "mock", "mock_script": str(mock_path)},
    "generation": {"model_id": "scripted-mock"},
}))

base = ["--config", str(config_path)]
stages = [
    base + ["validate", "--corpus", str(corpus_path)],
    base + ["build-aux", "--corpus", str(corpus_path), "--split", "train"],
    base + ["schedule", "--corpus", str(corpus_path),
            "--aux", str(out_dir / "aux_supervision.jsonl"),
            "--strategy", "multi_stage", "--steps", "30", "--t0", "12",
            "--seed", "1"],
    base + ["runspec"],
    base + ["predict", "--corpus", str(corpus_path), "--split", "test",
            "--task", "sentiment"],
    base + ["evaluate", "--corpus", str(corpus_path),
            "--predictions", str(out_dir / "predictions_sentiment_test.jsonl"),
            "--split", "test", "--task", "sentiment"],
    base + ["report", str(out_dir / "metrics_sentiment_test.json"),
            "--names", "MockModel"],
]
for argv in stages:
    print(f"\n$ emopipe {' '.join(argv[2:])}")
    status = run_command(argv)
    assert status == 0, f"stage failed with {status}"

print("\nartifacts in", out_dir)
for path in sorted(out_dir.iterdir()):
    print(" ", path.name)
