"""Load, validate, and speaker-disjointly split a corpus manifest.

Builds a small manifest on the fly, so the script runs anywhere.
"""

import json
import tempfile
from pathlib import Path

from emopipe.corpus import load_corpus, split_corpus, validate_corpus

workdir = Path(tempfile.mkdtemp(prefix="emopipe_demo_"))
manifest = workdir / "corpus.jsonl"

records = []
for i in range(12):
    sentiment = ["negative", "neutral", "positive"][i % 3]
    records.append({
        "id": f"seg_{i:03d}",
        "speaker_id": f"spk_{i % 5}",
        "gender": "female" if i % 2 else "male",
        "topic": "sharing",
        "transcript": f"kalimat contoh nomor {i}",
        "duration_s": 4.5,
        "sentiment_gt": {"multimodal": sentiment, "text": sentiment},
        "split": "train",
    })
manifest.write_text("\n".join(json.dumps(r) for r in records) + "\n")

corpus = load_corpus(manifest)
print(f"loaded {len(corpus)} samples from {manifest}")

report = validate_corpus(corpus)
print(f"validation: {len(report.errors)} errors, {len(report.warnings)} warnings")
print("split counts:", report.counts["per_split"])
print("sentiment counts:", report.counts["per_sentiment"])

resplit = split_corpus(corpus, (0.6, 0.2, 0.2), seed=42)
by_speaker = {}
for sample in resplit.samples:
    by_speaker.setdefault(sample.speaker_id, set()).add(sample.split)
print("\nafter split_corpus (speaker-disjoint):")
for speaker, splits in sorted(by_speaker.items()):
    print(f"  {speaker}: {sorted(splits)}")
