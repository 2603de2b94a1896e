"""Label taxonomies shared across the pipeline."""

from __future__ import annotations

SENTIMENTS = ("negative", "neutral", "positive")

# Fixed category order; doubles as the deterministic tie-break order
# when annotation aggregation lands on a tie that excludes neutral.
EMOTIONS = ("fear", "disgust", "anger", "sadness", "neutral", "happiness", "surprise")

# Sentinel for model outputs that failed to parse or fell outside a taxonomy.
# Kept as a first-class value so evaluation can penalize it instead of
# dropping samples.
INVALID = "invalid"

# Emotions admissible under each predicted sentiment during hierarchical
# decoding. Surprise is reachable from both polarities but not from neutral.
# Configurable: pass an alternative map to decode_hierarchical.
SENTIMENT_EMOTION_COMPAT = {
    "neutral": frozenset({"neutral"}),
    "positive": frozenset({"happiness", "surprise"}),
    "negative": frozenset({"fear", "disgust", "anger", "sadness", "surprise"}),
}

GENDERS = ("male", "female", "unknown")
SPLITS = ("train", "val", "test")
MODALITIES = ("text", "audio", "visual")
