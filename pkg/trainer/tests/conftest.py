"""Shared manifest and run-spec factories for trainer tests."""

from __future__ import annotations

import json
from pathlib import Path

from adaptrain.manifest import ManifestEntry

TARGET_TEXTS = [
    '{"Sentiment": "negative"}',
    '{"Sentiment": "neutral"}',
    '{"Sentiment": "positive"}',
    '{"Sentiment": "neutral", "Emotion": "neutral"}',
]


def toy_entries(n: int = 4):
    return [
        ManifestEntry(
            step=i + 1,
            sample_id=f"seg_{i:03d}",
            instruction_type="main_sentiment",
            prompt_text=f"Analyze segment number {i} and return the sentiment.\n",
            attachments=(),
            target_text=TARGET_TEXTS[i % len(TARGET_TEXTS)],
        )
        for i in range(n)
    ]


def toy_runspec(**overrides) -> dict:
    spec = {
        "lora": {
            "rank": 8,
            "alpha": 16,
            "targets": ["text_encoder.attn", "thinker.attn", "lm_head"],
            "frozen": [],
        },
        "optimizer": {"name": "adamw", "lr": 0.01, "schedule": "cosine"},
        "batch": {"per_device": 1, "grad_accum": 1},
        "epochs": 1,
    }
    for section, values in overrides.items():
        if isinstance(values, dict):
            spec[section].update(values)
        else:
            spec[section] = values
    return spec


def write_manifest_file(path: Path, entries) -> Path:
    """Write entries in the pipeline's manifest wire format."""
    header = {"kind": "training_manifest", "strategy": "multi_stage",
              "total_steps": len(entries), "t0": 0, "seed": 0,
              "main_granularity": "main_sentiment",
              "corpus_hash": "0" * 64, "supervision_hash": "0" * 64,
              "template_hash": "0" * 64}
    lines = [json.dumps(header)]
    for entry in entries:
        lines.append(json.dumps({
            "step": entry.step,
            "sample_id": entry.sample_id,
            "instruction_type": entry.instruction_type,
            "prompt": {"instruction_text": entry.prompt_text,
                       "attachments": [list(a) for a in entry.attachments],
                       "expected_schema": entry.instruction_type,
                       "sample_id": entry.sample_id,
                       "constraint": None},
            "target_text": entry.target_text,
        }))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
