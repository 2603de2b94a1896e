"""Two-step consistency-checked auxiliary supervision construction.

For each (sample, modality) pair the model is first asked for an
unconstrained sentiment prediction plus explanation. When the prediction
matches the gold label the explanation is retained as-is; otherwise the
prompt is re-issued with the gold sentiment fixed as a constraint and
only the regenerated justification is kept. Outputs that never parse are
retried up to the attempt cap and then recorded as failed, so the
scheduler can exclude them deliberately.

The cache and output files are line-delimited record objects; a record is
reused when (sample_id, modality, template_hash, model_id) all match, so
re-runs after a template or model change rebuild exactly the stale pairs.
Step-1 text discarded by a regeneration is logged for audit, not stored.
"""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .gateway import GatewayError, GenOptions
from .labels import INVALID, MODALITIES
from .outparse import parse_output
from .prompts import MODALITY_TO_TYPE, render_prompt, template_set_hash

log = logging.getLogger(__name__)

_RECORD_FIELDS = (
    "sample_id", "modality", "sentiment_gt", "sentiment_pred", "consistent",
    "explanation", "keywords", "attempts", "status", "model_id",
    "template_hash", "gt_source", "diagnostics",
)


class SupervisionError(ValueError):
    pass


class CacheCorruptError(SupervisionError):
    """The cache file could not be parsed; refusing to rebuild silently."""


@dataclass(frozen=True)
class ConstructorConfig:
    max_attempts: int = 3        # total completion calls per pair, step 1 included
    options: GenOptions = field(default_factory=GenOptions)
    parallelism: int = 1
    language: str = "Indonesian"


@dataclass(frozen=True)
class AuxSupervisionRecord:
    sample_id: str
    modality: str
    sentiment_gt: str
    sentiment_pred: str
    consistent: bool
    explanation: str
    attempts: int
    status: str                  # "retained" | "regenerated" | "failed"
    model_id: str
    template_hash: str
    keywords: tuple | None = None  # text modality only
    gt_source: str = "channel"     # "channel" | "multimodal_fallback"
    diagnostics: str | None = None

    @property
    def usable(self) -> bool:
        return self.status != "failed"

    def to_record(self) -> dict:
        record = {}
        for name in _RECORD_FIELDS:
            value = getattr(self, name)
            if name == "keywords" and value is not None:
                value = list(value)
            record[name] = value
        return record

    @staticmethod
    def from_record(record: dict) -> "AuxSupervisionRecord":
        keywords = record.get("keywords")
        return AuxSupervisionRecord(
            sample_id=record["sample_id"],
            modality=record["modality"],
            sentiment_gt=record["sentiment_gt"],
            sentiment_pred=record["sentiment_pred"],
            consistent=bool(record["consistent"]),
            explanation=record.get("explanation", ""),
            attempts=int(record["attempts"]),
            status=record["status"],
            model_id=record["model_id"],
            template_hash=record["template_hash"],
            keywords=tuple(keywords) if keywords is not None else None,
            gt_source=record.get("gt_source", "channel"),
            diagnostics=record.get("diagnostics"),
        )


def gold_sentiment(sample, modality: str):
    """Per-channel gold label when present, else the multimodal fallback."""
    if modality in sample.sentiment_gt:
        return sample.sentiment_gt[modality], "channel"
    return sample.sentiment_gt["multimodal"], "multimodal_fallback"


def construct_one(sample, modality: str, gw, cfg: ConstructorConfig) -> AuxSupervisionRecord:
    """Run the two-step consistency check for one (sample, modality) pair."""
    if modality not in MODALITIES:
        raise SupervisionError(f"unknown modality {modality!r}")
    itype = MODALITY_TO_TYPE[modality]
    gt, gt_source = gold_sentiment(sample, modality)
    tmpl_hash = template_set_hash()
    model_id = cfg.options.model_id
    is_text = modality == "text"

    def record(**kw):
        return AuxSupervisionRecord(
            sample_id=sample.id, modality=modality, sentiment_gt=gt,
            model_id=model_id, template_hash=tmpl_hash, gt_source=gt_source, **kw,
        )

    attempts = 0
    try:
        bundle = render_prompt(sample, itype, language=cfg.language)
        completion = gw.complete(bundle, cfg.options)
        attempts = 1
    except GatewayError as exc:
        return record(
            sentiment_pred=INVALID, consistent=False, explanation="",
            attempts=max(attempts, 1), status="failed", diagnostics=str(exc),
        )

    parsed = parse_output(itype, completion.text)
    if parsed.valid and parsed.sentiment == gt:
        return record(
            sentiment_pred=parsed.sentiment, consistent=True,
            explanation=parsed.explanation,
            keywords=tuple(parsed.keywords) if is_text else None,
            attempts=attempts, status="retained",
        )

    # Step 2: prediction disagreed (or never parsed); regenerate under the
    # gold label. Only the constrained explanation is kept as supervision.
    step1_pred = parsed.sentiment if parsed.valid else INVALID
    if not parsed.valid:
        log.debug("step-1 output for %s/%s invalid (%s): %r",
                  sample.id, modality, ",".join(parsed.reasons), completion.text)
    else:
        log.debug("step-1 prediction for %s/%s was %s, gold %s; step-1 text: %r",
                  sample.id, modality, step1_pred, gt, completion.text)

    last_reasons = parsed.reasons
    while attempts < cfg.max_attempts:
        try:
            bundle = render_prompt(sample, itype, constraint=gt, language=cfg.language)
            completion = gw.complete(bundle, cfg.options)
            attempts += 1
        except GatewayError as exc:
            return record(
                sentiment_pred=step1_pred, consistent=False, explanation="",
                attempts=attempts, status="failed", diagnostics=str(exc),
            )
        regen = parse_output(itype, completion.text)
        if regen.valid and regen.explanation:
            return record(
                sentiment_pred=step1_pred, consistent=False,
                explanation=regen.explanation,
                keywords=tuple(regen.keywords) if is_text else None,
                attempts=attempts, status="regenerated",
            )
        last_reasons = regen.reasons

    return record(
        sentiment_pred=step1_pred, consistent=False, explanation="",
        attempts=attempts, status="failed",
        diagnostics="unparseable output: " + ",".join(last_reasons or ["unknown"]),
    )


def _load_cache(path: Path) -> dict:
    cache = {}
    if not path.exists():
        return cache
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = AuxSupervisionRecord.from_record(json.loads(line))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CacheCorruptError(
                f"{path} line {line_no} is unreadable ({exc}); "
                "refusing to run against a corrupt cache"
            ) from exc
        cache[(rec.sample_id, rec.modality, rec.template_hash, rec.model_id)] = rec
    return cache


def records_to_jsonl(records) -> str:
    """Canonical serialization; byte-identical for identical record lists."""
    lines = [json.dumps(r.to_record(), ensure_ascii=False) for r in records]
    return "\n".join(lines) + ("\n" if lines else "")


def write_records(records, path) -> None:
    Path(path).write_text(records_to_jsonl(records), encoding="utf-8")


def supervision_hash(records) -> str:
    from .hashing import stable_hash

    return stable_hash([r.to_record() for r in records])


def build_supervision(corpus, modalities, gw, cache_path, cfg: ConstructorConfig):
    """Construct one record per requested (sample, modality) pair.

    Pairs already in the cache are reused without gateway traffic. New
    records append to the cache as they complete; the returned list is
    sorted by (sample_id, modality) regardless of execution order.
    """
    modalities = sorted(set(modalities))
    unknown = [m for m in modalities if m not in MODALITIES]
    if unknown:
        raise SupervisionError(f"unknown modalities {unknown}")

    cache_path = Path(cache_path)
    cache = _load_cache(cache_path)
    tmpl_hash = template_set_hash()
    model_id = cfg.options.model_id

    pairs = sorted(
        ((sample, modality) for sample in corpus.samples for modality in modalities),
        key=lambda p: (p[0].id, p[1]),
    )

    results = {}
    todo = []
    for sample, modality in pairs:
        key = (sample.id, modality, tmpl_hash, model_id)
        if key in cache:
            results[(sample.id, modality)] = cache[key]
        else:
            todo.append((sample, modality))

    write_lock = threading.Lock()

    def run(pair):
        sample, modality = pair
        rec = construct_one(sample, modality, gw, cfg)
        with write_lock:
            with cache_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(rec.to_record(), ensure_ascii=False) + "\n")
        return rec

    if todo:
        if cfg.parallelism > 1:
            with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
                fresh = list(pool.map(run, todo))
        else:
            fresh = [run(pair) for pair in todo]
        for (sample, modality), rec in zip(todo, fresh):
            results[(sample.id, modality)] = rec

    return [results[(s.id, m)] for s, m in pairs]
