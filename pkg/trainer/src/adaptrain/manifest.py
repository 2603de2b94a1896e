"""Readers for the pipeline's training-manifest and run-spec files.

A manifest is UTF-8 JSONL: the first line is a header object, each
following line one entry {step, sample_id, instruction_type, prompt,
target_text} where prompt carries instruction_text and attachments. The
run spec is one JSON document; only the fields this trainer consumes are
validated, everything else passes through untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    step: int
    sample_id: str
    instruction_type: str
    prompt_text: str
    attachments: tuple
    target_text: str


def load_manifest(path):
    """Returns (header, entries) with entries in manifest step order."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ManifestError(f"{path} is empty")
    header = json.loads(lines[0])
    if header.get("kind") != "training_manifest":
        raise ManifestError(f"{path} does not start with a training_manifest header")
    entries = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        record = json.loads(line)
        prompt = record.get("prompt", {})
        entries.append(ManifestEntry(
            step=int(record["step"]),
            sample_id=record["sample_id"],
            instruction_type=record["instruction_type"],
            prompt_text=prompt.get("instruction_text", ""),
            attachments=tuple(tuple(a) for a in prompt.get("attachments", [])),
            target_text=record["target_text"],
        ))
    if [e.step for e in entries] != sorted(e.step for e in entries):
        raise ManifestError(f"{path} entries are not in step order")
    return header, entries


def load_runspec(path) -> dict:
    spec = json.loads(Path(path).read_text(encoding="utf-8"))
    for section, key in (("lora", "rank"), ("lora", "alpha"),
                         ("optimizer", "lr"), ("batch", "grad_accum")):
        if key not in spec.get(section, {}):
            raise ManifestError(f"run spec is missing {section}.{key}")
    if "targets" not in spec["lora"] or not spec["lora"]["targets"]:
        raise ManifestError("run spec names no adapter targets")
    return spec
