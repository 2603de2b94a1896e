"""Collect scripted predictions, decode hierarchically, score, and report."""

import json
import tempfile
from pathlib import Path

from emopipe.corpus import Corpus, Sample
from emopipe.evaluate import (
    collect_predictions,
    evaluate_predictions,
    render_report,
)
from emopipe.gateway import Gateway, GenOptions, MockTransport

workdir = Path(tempfile.mkdtemp(prefix="emopipe_demo_"))

plan = [
    ("negative", "sadness", "negative", "sadness"),    # correct
    ("neutral", "neutral", "neutral", "neutral"),      # correct
    ("positive", "happiness", "negative", "sadness"),  # wrong sentiment
    ("positive", "happiness", "positive", "anger"),    # incompatible emotion
    ("negative", "fear", None, None),                  # unparseable output
]

samples, script = [], {}
for i, (gold_s, gold_e, pred_s, pred_e) in enumerate(plan):
    audio = workdir / f"a{i}.wav"
    video = workdir / f"v{i}.mp4"
    audio.write_bytes(b"x")
    video.write_bytes(b"x")
    sample = Sample(
        id=f"seg_{i:03d}", speaker_id=f"spk_{i}", split="test",
        sentiment_gt={"multimodal": gold_s}, transcript=f"kalimat {i}",
        audio_path=str(audio), video_path=str(video), emotion_gt=gold_e,
    )
    samples.append(sample)
    if pred_s is None:
        script[f"{sample.id}|main_emotion"] = "tidak bisa menjawab"
    else:
        script[f"{sample.id}|main_emotion"] = json.dumps(
            {"Sentiment": pred_s, "Emotion": pred_e})

corpus = Corpus(samples=tuple(samples))
gateway = Gateway(MockTransport(script), sleep=lambda s: None)

records = collect_predictions(corpus, "test", gateway, "emotion", GenOptions())
print("hierarchically decoded predictions:")
for record in records:
    print(f"  {record.sample_id}: sentiment={record.final_sentiment:8} "
          f"emotion={record.final_emotion}")

report = evaluate_predictions(corpus, "test", records, "emotion")
print(f"\naccuracy={report.accuracy:.3f}  macro_f1={report.macro_f1:.3f}  "
      f"weighted_f1={report.weighted_f1:.3f}  invalid_rate={report.invalid_rate:.3f}")
print("confusion row for 'happiness':", report.confusion["happiness"])

doc = render_report([("Scripted", report)])
print("\n" + doc.text)
