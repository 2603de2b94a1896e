"""Two-step consistency-checked supervision with a scripted mock endpoint.

Shows the three outcomes (retained / regenerated / failed) and the warm
cache skipping all gateway traffic on the second run.
"""

import json
import tempfile
from pathlib import Path

from emopipe.corpus import Corpus, Sample
from emopipe.gateway import Gateway, MockTransport
from emopipe.supervision import ConstructorConfig, build_supervision

workdir = Path(tempfile.mkdtemp(prefix="emopipe_demo_"))

samples = []
for i, sentiment in enumerate(["negative", "positive", "neutral"]):
    samples.append(Sample(
        id=f"seg_{i:03d}", speaker_id=f"spk_{i}", split="train",
        sentiment_gt={"multimodal": sentiment, "text": sentiment},
        transcript=f"kalimat {i}",
    ))
corpus = Corpus(samples=tuple(samples))


def aux_json(sentiment, explanation):
    return json.dumps({"Sentiment": sentiment, "Emotion_keywords": ["kata"],
                       "Explanation": explanation})


script = {
    # seg_000: step 1 agrees with gold -> retained
    "seg_000|aux_text": aux_json("negative", "prediksi cocok dengan label"),
    # seg_001: step 1 disagrees -> constrained regeneration
    "seg_001|aux_text": aux_json("negative", "prediksi salah"),
    "seg_001|aux_text|constrained": aux_json("positive", "justifikasi label emas"),
    # seg_002: never parses -> failed at the attempt cap
    "seg_002|aux_text": "maaf, saya tidak bisa menjawab dalam JSON",
    "seg_002|aux_text|constrained": "masih bukan JSON",
}

transport = MockTransport(script)
gateway = Gateway(transport, sleep=lambda s: None)
cache = workdir / "cache.jsonl"

records = build_supervision(corpus, ["text"], gateway, cache, ConstructorConfig())
for record in records:
    print(f"{record.sample_id}: status={record.status:11} "
          f"attempts={record.attempts} pred={record.sentiment_pred:8} "
          f"explanation={record.explanation!r}")

calls_cold = transport.calls
build_supervision(corpus, ["text"], gateway, cache, ConstructorConfig())
print(f"\ngateway calls: {calls_cold} cold, "
      f"{transport.calls - calls_cold} on the warm rerun (cache: {cache})")
