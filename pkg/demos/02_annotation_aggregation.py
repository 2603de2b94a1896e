"""Aggregate annotator votes and Likert ratings into gold labels."""

from emopipe.annotate import (
    EmotionLikertRecord,
    SentimentVoteRecord,
    aggregate_emotion,
    aggregate_sentiment,
    agreement_rate,
)
from emopipe.labels import EMOTIONS

votes = [
    SentimentVoteRecord("seg_001", f"annotator_{i}", vote)
    for i, vote in enumerate(["positive", "positive", "positive", "neutral", "negative"])
]
decision = aggregate_sentiment(votes)
print("sentiment majority vote:", decision.label, decision.status, decision.tally)

tied = [
    SentimentVoteRecord("seg_002", f"annotator_{i}", vote)
    for i, vote in enumerate(["positive", "positive", "neutral", "neutral", "negative"])
]
print("2-2-1 tie:", aggregate_sentiment(tied).label,
      aggregate_sentiment(tied).status)

rows = [
    {"fear": 0, "disgust": 0, "anger": 0, "sadness": 2,
     "neutral": 1, "happiness": 0, "surprise": 0},
    {"fear": 0, "disgust": 0, "anger": 1, "sadness": 3,
     "neutral": 0, "happiness": 0, "surprise": 0},
    {"fear": 1, "disgust": 0, "anger": 0, "sadness": 2,
     "neutral": 1, "happiness": 0, "surprise": 0},
]
likert = [
    EmotionLikertRecord("seg_001", f"annotator_{i}", scores)
    for i, scores in enumerate(rows)
]
emotion = aggregate_emotion(likert)
print("\nemotion cumulative scores:", {k: v for k, v in emotion.tally.items() if v})
print("emotion label:", emotion.label, emotion.status)

decisions = [decision, aggregate_sentiment(tied), emotion]
print(f"\nagreement rate over {len(decisions)} decisions:",
      f"{agreement_rate(decisions):.3f}")
print("categories in tie-break order:", ", ".join(EMOTIONS))
