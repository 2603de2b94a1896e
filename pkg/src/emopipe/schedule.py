"""Deterministic training manifests and the adapter fine-tuning run spec.

Two scheduling policies are supported. Multi-stage draws only auxiliary
instructions for steps 1..t0 and only main-task instructions afterwards;
hybrid draws every step's instruction type from a fixed mixing
distribution. Both sample training items with replacement from the train
split, seeded, so identical inputs and seed give byte-identical manifest
files.

A manifest is JSONL: one header object (strategy, seed, and the corpus /
supervision / template hashes), then one entry per step. Targets are the
serialized gold answers; every target parses back to the gold labels it
encodes.

Defaults the source protocol leaves open, all overridable: total steps =
epochs x train-set size, the stage boundary t0 = floor(0.4 * T), and a
uniform hybrid mix over the four instruction types.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .hashing import stable_hash
from .prompts import InstructionType, render_prompt, template_set_hash
from .supervision import supervision_hash

# The scheduler's instruction-type alphabet: three auxiliary types plus
# one main slot whose granularity the plan chooses.
MIX_KEYS = ("aux_text", "aux_audio", "aux_visual", "main")

DEFAULT_EPOCHS = 5

DEFAULT_RUNSPEC = {
    "lora": {
        "rank": 8,
        "alpha": 16,
        "targets": [
            "text_encoder.attn",
            "audio_encoder.attn",
            "vision_encoder.attn",
            "thinker.attn",
        ],
        "frozen": ["vision_tower", "multimodal_projector"],
    },
    "optimizer": {"name": "adamw", "lr": 5e-5, "schedule": "cosine"},
    "batch": {"per_device": 1, "grad_accum": 64},
    "epochs": DEFAULT_EPOCHS,
}


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class SchedulePlan:
    strategy: str                     # "multi_stage" | "hybrid"
    total_steps: int
    t0: int = 0                       # multi_stage only
    mix_weights: dict | None = None   # hybrid only; keys from MIX_KEYS
    seed: int = 0
    main_granularity: str = "main_sentiment"

    def validate(self):
        if self.strategy not in ("multi_stage", "hybrid"):
            raise ScheduleError(f"unknown strategy {self.strategy!r}")
        if self.total_steps < 1:
            raise ScheduleError("total_steps must be positive")
        if self.main_granularity not in ("main_sentiment", "main_emotion"):
            raise ScheduleError(f"unknown granularity {self.main_granularity!r}")
        if self.strategy == "multi_stage":
            if not 0 <= self.t0 <= self.total_steps:
                raise ScheduleError(f"t0={self.t0} outside [0, {self.total_steps}]")
        else:
            weights = self.mix_weights or {}
            unknown = sorted(set(weights) - set(MIX_KEYS))
            if unknown:
                raise ScheduleError(f"unknown mix keys {unknown}")
            if any(w < 0 for w in weights.values()):
                raise ScheduleError("mix weights must be nonnegative")
            total = sum(weights.values())
            if total == 0:
                raise ScheduleError("mix weights are all zero")
            if abs(total - 1.0) > 1e-9:
                raise ScheduleError(f"mix weights sum to {total}, expected 1")


def default_total_steps(n_train: int, epochs: int = DEFAULT_EPOCHS) -> int:
    return max(1, epochs * n_train)


def default_t0(total_steps: int) -> int:
    return math.floor(0.4 * total_steps)


def uniform_mix() -> dict:
    return {key: 1.0 / len(MIX_KEYS) for key in MIX_KEYS}


@dataclass(frozen=True)
class TrainingManifestEntry:
    step: int
    sample_id: str
    instruction_type: str
    prompt: dict              # serialized PromptBundle
    target_text: str

    def to_record(self) -> dict:
        return {
            "step": self.step,
            "sample_id": self.sample_id,
            "instruction_type": self.instruction_type,
            "prompt": self.prompt,
            "target_text": self.target_text,
        }

    @staticmethod
    def from_record(record: dict) -> "TrainingManifestEntry":
        return TrainingManifestEntry(
            step=int(record["step"]),
            sample_id=record["sample_id"],
            instruction_type=record["instruction_type"],
            prompt=record["prompt"],
            target_text=record["target_text"],
        )


@dataclass
class TrainingManifest:
    header: dict
    entries: list = field(default_factory=list)

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header, ensure_ascii=False, sort_keys=True)]
        lines += [
            json.dumps(e.to_record(), ensure_ascii=False) for e in self.entries
        ]
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @staticmethod
    def load(path) -> "TrainingManifest":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines:
            raise ScheduleError(f"{path} is empty")
        header = json.loads(lines[0])
        entries = [
            TrainingManifestEntry.from_record(json.loads(line))
            for line in lines[1:] if line.strip()
        ]
        return TrainingManifest(header=header, entries=entries)


def aux_target_text(record) -> str:
    """Serialize the gold auxiliary answer for one supervision record."""
    payload = {"Sentiment": record.sentiment_gt}
    if record.modality == "text":
        payload["Emotion_keywords"] = list(record.keywords or ())
    payload["Explanation"] = record.explanation
    return json.dumps(payload, ensure_ascii=False)


def main_target_text(sample, granularity: str) -> str:
    payload = {"Sentiment": sample.sentiment_gt["multimodal"]}
    if granularity == "main_emotion":
        payload["Emotion"] = sample.emotion_gt
    return json.dumps(payload, ensure_ascii=False)


def _aux_pools(corpus, aux_records, language: str) -> dict:
    """Usable supervision records joined to train-split samples, per type."""
    train = {s.id: s for s in corpus.by_split("train")}
    pools = {key: [] for key in MIX_KEYS[:3]}
    usable = sorted(
        (r for r in aux_records if r.usable and r.sample_id in train),
        key=lambda r: (r.sample_id, r.modality),
    )
    for record in usable:
        sample = train[record.sample_id]
        itype = InstructionType(f"aux_{record.modality}")
        bundle = render_prompt(sample, itype, language=language)
        pools[itype.value].append(
            TrainingManifestEntry(
                step=0,
                sample_id=sample.id,
                instruction_type=itype.value,
                prompt=bundle.to_record(),
                target_text=aux_target_text(record),
            )
        )
    return pools


def _main_pool(corpus, granularity: str, language: str) -> list:
    itype = InstructionType(granularity)
    pool = []
    for sample in sorted(corpus.by_split("train"), key=lambda s: s.id):
        if granularity == "main_emotion" and sample.emotion_gt is None:
            continue
        bundle = render_prompt(sample, itype, language=language)
        pool.append(
            TrainingManifestEntry(
                step=0,
                sample_id=sample.id,
                instruction_type=itype.value,
                prompt=bundle.to_record(),
                target_text=main_target_text(sample, granularity),
            )
        )
    return pool


def _pick(pool, rng, step):
    template = pool[rng.randrange(len(pool))]
    return TrainingManifestEntry(
        step=step,
        sample_id=template.sample_id,
        instruction_type=template.instruction_type,
        prompt=template.prompt,
        target_text=template.target_text,
    )


def _header(plan: SchedulePlan, corpus, aux_records, extra: dict | None) -> dict:
    header = {
        "kind": "training_manifest",
        "strategy": plan.strategy,
        "total_steps": plan.total_steps,
        "seed": plan.seed,
        "main_granularity": plan.main_granularity,
        "corpus_hash": corpus.content_hash(),
        "supervision_hash": supervision_hash(aux_records),
        "template_hash": template_set_hash(),
    }
    if plan.strategy == "multi_stage":
        header["t0"] = plan.t0
    else:
        header["mix_weights"] = dict(sorted((plan.mix_weights or {}).items()))
    if extra:
        header.update(extra)
    return header


def plan_multistage(corpus, aux_records, plan: SchedulePlan,
                    language: str = "Indonesian",
                    header_extra: dict | None = None) -> TrainingManifest:
    """Stage I (steps <= t0) draws auxiliary items only; Stage II main only."""
    plan.validate()
    if plan.strategy != "multi_stage":
        raise ScheduleError("plan strategy is not multi_stage")

    pools = _aux_pools(corpus, aux_records, language)
    aux_pool = [e for key in MIX_KEYS[:3] for e in pools[key]]
    main_pool = _main_pool(corpus, plan.main_granularity, language)

    if plan.t0 > 0 and not aux_pool:
        raise ScheduleError("t0 > 0 but no usable supervision records for train split")
    if plan.t0 < plan.total_steps and not main_pool:
        raise ScheduleError("no main-task instances in the train split")

    rng = random.Random(plan.seed)
    entries = []
    for step in range(1, plan.total_steps + 1):
        pool = aux_pool if step <= plan.t0 else main_pool
        entries.append(_pick(pool, rng, step))
    return TrainingManifest(
        header=_header(plan, corpus, aux_records, header_extra), entries=entries
    )


def plan_hybrid(corpus, aux_records, plan: SchedulePlan,
                language: str = "Indonesian",
                header_extra: dict | None = None) -> TrainingManifest:
    """Every step draws its instruction type from the mixing weights."""
    plan.validate()
    if plan.strategy != "hybrid":
        raise ScheduleError("plan strategy is not hybrid")
    weights = plan.mix_weights or {}

    pools = _aux_pools(corpus, aux_records, language)
    pools["main"] = _main_pool(corpus, plan.main_granularity, language)
    for key in MIX_KEYS:
        if weights.get(key, 0) > 0 and not pools[key]:
            raise ScheduleError(f"mix weight on {key!r} but no usable instances")

    active = [(key, weights[key]) for key in MIX_KEYS if weights.get(key, 0) > 0]
    rng = random.Random(plan.seed)
    entries = []
    for step in range(1, plan.total_steps + 1):
        roll = rng.random()
        cumulative = 0.0
        chosen = active[-1][0]
        for key, weight in active:
            cumulative += weight
            if roll < cumulative:
                chosen = key
                break
        entries.append(_pick(pools[chosen], rng, step))
    return TrainingManifest(
        header=_header(plan, corpus, aux_records, header_extra), entries=entries
    )


def _deep_merge(base: dict, overrides: dict) -> dict:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def emit_runspec(overrides: dict | None = None,
                 provenance: dict | None = None) -> dict:
    """Self-contained adapter fine-tuning run spec; every field overridable.

    Defaults: rank 8, alpha 16, adapters on the attention layers of all
    modality encoders and the cross-modal reasoning block, AdamW at 5e-5
    with cosine annealing, batch 1 x 64 accumulation, 5 epochs.
    """
    spec = _deep_merge(DEFAULT_RUNSPEC, overrides or {})
    spec["provenance"] = dict(provenance or {})
    return spec


def runspec_to_json(spec: dict) -> str:
    return json.dumps(spec, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def manifest_hash(manifest: TrainingManifest) -> str:
    return stable_hash(
        [manifest.header] + [e.to_record() for e in manifest.entries]
    )
