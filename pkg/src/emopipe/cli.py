"""Command-line entry point wiring all pipeline stages.

Commands compose through files only and never mutate their inputs.
Every emitted artifact embeds the configuration hash, either directly
(structured documents, manifest headers) or through a ``.meta.json``
sidecar (record streams). Timestamps and latencies never enter hashed
artifacts; they go to ``run.log`` in the output directory.

Configuration is a JSON document with per-command sections; flags
override the config, and the API key is read from the environment
variable the config names, never stored anywhere.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import annotate, corpus as corpus_mod, evaluate as eval_mod, schedule as sched_mod
from . import supervision as sup_mod
from .gateway import Gateway, GatewayError, GenOptions, HttpTransport, MockTransport
from .hashing import stable_hash
from .outparse import ExtractionError
from .prompts import PromptError, template_set_hash

_STAGE_OF = {
    corpus_mod.CorpusError: "corpus",
    annotate.AnnotationError: "annotate",
    PromptError: "prompts",
    ExtractionError: "outparse",
    GatewayError: "gateway",
    sup_mod.SupervisionError: "supervision",
    sched_mod.ScheduleError: "schedule",
    eval_mod.EvaluationError: "evaluate",
}


class PipelineError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def _stage_for(exc: Exception) -> str:
    for cls, stage in _STAGE_OF.items():
        if isinstance(exc, cls):
            return stage
    return "cli"


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def config_hash(config: dict) -> str:
    return stable_hash(config)


def _out_dir(config: dict, args) -> Path:
    out = getattr(args, "output_dir", None) or config.get("output_dir", "out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _run_log(out_dir: Path, command: str, message: str) -> None:
    # Timestamps live here, outside any hashed artifact.
    with (out_dir / "run.log").open("a", encoding="utf-8") as handle:
        handle.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {command} {message}\n")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def _load_corpus(config: dict, args) -> corpus_mod.Corpus:
    section = config.get("corpus", {})
    path = getattr(args, "corpus", None) or section.get("path")
    if not path:
        raise PipelineError("corpus", "no corpus path given (flag --corpus or config corpus.path)")
    return corpus_mod.load_corpus(path, language_tag=section.get("language_tag", "ind"))


def _language(config: dict) -> str:
    return config.get("corpus", {}).get("language", "Indonesian")


def _gen_options(config: dict) -> GenOptions:
    section = config.get("generation", {})
    return GenOptions(
        model_id=section.get("model_id", "omni-chat"),
        temperature=section.get("temperature", 0.2),
        max_tokens=section.get("max_tokens", 512),
        seed=section.get("seed"),
        timeout_s=section.get("timeout_s", 120.0),
    )


def _gateway(config: dict) -> Gateway:
    section = config.get("gateway", {})
    kind = section.get("transport", "http")
    if kind == "mock":
        script = section.get("mock_script")
        if not script:
            raise PipelineError("gateway", "mock transport requires gateway.mock_script")
        transport = MockTransport.from_file(script)
    elif kind == "http":
        base_url = section.get("base_url")
        if not base_url:
            raise PipelineError("gateway", "gateway.base_url is not configured")
        api_key = None
        key_env = section.get("api_key_env")
        if key_env:
            api_key = os.environ.get(key_env)
        transport = HttpTransport(base_url, api_key=api_key)
    else:
        raise PipelineError("gateway", f"unknown transport {kind!r}")
    return Gateway(
        transport,
        max_attempts=section.get("max_attempts", 4),
        backoff_s=section.get("backoff_s", 0.5),
        backoff_factor=section.get("backoff_factor", 2.0),
        rate_limit_rps=section.get("rate_limit_rps"),
    )


def _filter_split(c: corpus_mod.Corpus, split: str | None) -> corpus_mod.Corpus:
    if not split or split == "all":
        return c
    return corpus_mod.Corpus(
        samples=tuple(c.by_split(split)), name=c.name, language_tag=c.language_tag
    )


def cmd_validate(config: dict, args) -> int:
    out_dir = _out_dir(config, args)
    c = _load_corpus(config, args)
    report = corpus_mod.validate_corpus(c)
    _write_json(out_dir / "validation_report.json", {
        "config_hash": config_hash(config),
        "corpus": c.name,
        "n_samples": len(c),
        "errors": [list(e) for e in report.errors],
        "warnings": [list(w) for w in report.warnings],
        "counts": report.counts,
    })
    _run_log(out_dir, "validate", f"{c.name}: {len(report.errors)} errors")
    print(json.dumps({
        "command": "validate", "status": "ok" if report.ok else "invalid",
        "errors": len(report.errors), "warnings": len(report.warnings),
    }))
    return 0 if report.ok else 1


def cmd_aggregate(config: dict, args) -> int:
    out_dir = _out_dir(config, args)
    records_path = args.records or config.get("annotate", {}).get("records")
    if not records_path:
        raise PipelineError("annotate", "no annotation records path given")
    votes, likerts = annotate.load_annotation_records(records_path)
    sentiment, emotion = annotate.aggregate_all(votes, likerts)

    decisions_path = out_dir / "decisions.jsonl"
    lines = []
    for phase, decisions in (("sentiment", sentiment), ("emotion", emotion)):
        for d in decisions:
            lines.append(json.dumps({
                "segment_id": d.segment_id, "phase": phase, "label": d.label,
                "status": d.status, "tally": d.tally,
            }, ensure_ascii=False))
    decisions_path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    summary = {
        "config_hash": config_hash(config),
        "n_sentiment_segments": len(sentiment),
        "n_emotion_segments": len(emotion),
        "sentiment_agreement": annotate.agreement_rate(sentiment) if sentiment else None,
        "emotion_agreement": annotate.agreement_rate(emotion) if emotion else None,
    }
    _write_json(out_dir / "decisions.meta.json", summary)
    _run_log(out_dir, "aggregate", f"{len(sentiment)}+{len(emotion)} segments")
    print(json.dumps({"command": "aggregate", "status": "ok", **{
        k: v for k, v in summary.items() if k != "config_hash"
    }}))
    return 0


def cmd_build_aux(config: dict, args) -> int:
    out_dir = _out_dir(config, args)
    c = _filter_split(_load_corpus(config, args), args.split)
    report = corpus_mod.validate_corpus(c)
    if not report.ok:
        raise PipelineError("corpus", f"corpus has {len(report.errors)} validation errors")

    section = config.get("constructor", {})
    cfg = sup_mod.ConstructorConfig(
        max_attempts=section.get("max_attempts", 3),
        options=_gen_options(config),
        parallelism=section.get("parallelism", 1),
        language=_language(config),
    )
    gw = _gateway(config)
    modalities = (args.modalities or section.get("modalities", "text,audio,visual")).split(",")
    cache = args.cache or section.get("cache") or str(out_dir / "aux_cache.jsonl")
    records = sup_mod.build_supervision(c, modalities, gw, cache, cfg)

    fresh = [r for r in records if r.status == "failed" and r.diagnostics]
    if records and len(fresh) == len(records):
        raise PipelineError("gateway", f"all {len(records)} constructions failed: {fresh[0].diagnostics}")

    out_path = Path(args.out or out_dir / "aux_supervision.jsonl")
    sup_mod.write_records(records, out_path)
    _write_json(out_path.with_suffix(".meta.json"), {
        "config_hash": config_hash(config),
        "supervision_hash": sup_mod.supervision_hash(records),
        "template_hash": template_set_hash(),
        "counts": {
            status: sum(1 for r in records if r.status == status)
            for status in ("retained", "regenerated", "failed")
        },
    })
    _run_log(out_dir, "build-aux", f"{len(records)} records")
    print(json.dumps({"command": "build-aux", "status": "ok", "records": len(records)}))
    return 0


def _plan_from(config: dict, args, n_train: int) -> sched_mod.SchedulePlan:
    section = config.get("schedule", {})
    strategy = args.strategy or section.get("strategy", "hybrid")
    total = args.steps or section.get("total_steps") or sched_mod.default_total_steps(
        n_train, section.get("epochs", sched_mod.DEFAULT_EPOCHS)
    )
    t0 = args.t0 if args.t0 is not None else section.get("t0")
    if t0 is None:
        t0 = sched_mod.default_t0(total)
    weights = section.get("mix_weights") or sched_mod.uniform_mix()
    seed = args.seed if args.seed is not None else section.get("seed", config.get("seed", 0))
    return sched_mod.SchedulePlan(
        strategy=strategy,
        total_steps=int(total),
        t0=int(t0),
        mix_weights=weights if strategy == "hybrid" else None,
        seed=int(seed),
        main_granularity=args.task_granularity or section.get(
            "main_granularity", "main_sentiment"
        ),
    )


def cmd_schedule(config: dict, args) -> int:
    out_dir = _out_dir(config, args)
    c = _load_corpus(config, args)
    aux_path = args.aux or config.get("schedule", {}).get("aux")
    if not aux_path:
        raise PipelineError("schedule", "no supervision records path given (--aux)")
    aux = [
        sup_mod.AuxSupervisionRecord.from_record(json.loads(line))
        for line in Path(aux_path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    plan = _plan_from(config, args, n_train=len(c.by_split("train")))
    planner = (sched_mod.plan_multistage if plan.strategy == "multi_stage"
               else sched_mod.plan_hybrid)
    manifest = planner(c, aux, plan, language=_language(config),
                       header_extra={"config_hash": config_hash(config)})
    out_path = Path(args.out or out_dir / "training_manifest.jsonl")
    manifest.write(out_path)
    _run_log(out_dir, "schedule", f"{plan.strategy} T={plan.total_steps}")
    print(json.dumps({
        "command": "schedule", "status": "ok",
        "manifest_hash": sched_mod.manifest_hash(manifest),
        "entries": len(manifest.entries),
    }))
    return 0


def cmd_runspec(config: dict, args) -> int:
    out_dir = _out_dir(config, args)
    manifest_path = args.manifest or str(out_dir / "training_manifest.jsonl")
    provenance = {
        "manifest_path": manifest_path,
        "template_hash": template_set_hash(),
        "seed": config.get("seed", 0),
        "config_hash": config_hash(config),
    }
    if Path(manifest_path).exists():
        manifest = sched_mod.TrainingManifest.load(manifest_path)
        provenance["corpus_hash"] = manifest.header.get("corpus_hash")
        provenance["supervision_hash"] = manifest.header.get("supervision_hash")
        provenance["manifest_hash"] = sched_mod.manifest_hash(manifest)
    overrides = dict(config.get("runspec", {}))
    if args.lr is not None:
        overrides.setdefault("optimizer", {})
        overrides["optimizer"] = {**overrides.get("optimizer", {}), "lr": args.lr}
    spec = sched_mod.emit_runspec(overrides, provenance=provenance)
    out_path = Path(args.out or out_dir / "runspec.json")
    out_path.write_text(sched_mod.runspec_to_json(spec), encoding="utf-8")
    _run_log(out_dir, "runspec", out_path.name)
    print(json.dumps({"command": "runspec", "status": "ok", "path": str(out_path)}))
    return 0


def cmd_predict(config: dict, args) -> int:
    out_dir = _out_dir(config, args)
    c = _load_corpus(config, args)
    gw = _gateway(config)
    records = eval_mod.collect_predictions(
        c, args.split, gw, args.task, _gen_options(config),
        parallelism=config.get("gateway", {}).get("parallelism", 1),
        language=_language(config),
    )
    out_path = Path(args.out or out_dir / f"predictions_{args.task}_{args.split}.jsonl")
    eval_mod.save_predictions(records, out_path)
    _write_json(out_path.with_suffix(".meta.json"), {
        "config_hash": config_hash(config),
        "task": args.task, "split": args.split, "n": len(records),
    })
    _run_log(out_dir, "predict", f"{args.task}/{args.split}: {len(records)}")
    print(json.dumps({"command": "predict", "status": "ok", "n": len(records)}))
    return 0


def cmd_evaluate(config: dict, args) -> int:
    out_dir = _out_dir(config, args)
    c = _load_corpus(config, args)
    records = eval_mod.load_predictions(args.predictions)
    report = eval_mod.evaluate_predictions(c, args.split, records, args.task)
    out_path = Path(args.out or out_dir / f"metrics_{args.task}_{args.split}.json")
    _write_json(out_path, {"config_hash": config_hash(config), **report.to_record()})
    _run_log(out_dir, "evaluate", f"{args.task}/{args.split}: macro_f1={report.macro_f1:.3f}")
    print(json.dumps({
        "command": "evaluate", "status": "ok",
        "accuracy": report.accuracy, "macro_f1": report.macro_f1,
        "weighted_f1": report.weighted_f1,
    }))
    return 0


def cmd_report(config: dict, args) -> int:
    out_dir = _out_dir(config, args)
    rows = []
    breakdowns = {}
    names = args.names.split(",") if args.names else None
    if names and len(names) != len(args.metrics):
        raise PipelineError("report", "--names count must match metrics files")
    for i, path in enumerate(args.metrics):
        record = json.loads(Path(path).read_text(encoding="utf-8"))
        record.pop("config_hash", None)
        report = eval_mod.MetricsReport.from_record(record)
        name = names[i] if names else Path(path).stem
        rows.append((name, report))
        if report.per_class_f1:
            breakdowns[name] = report.per_class_f1
    # A class-by-model table only makes sense when every report covers the
    # same taxonomy.
    class_sets = {frozenset(b) for b in breakdowns.values()}
    if len(breakdowns) != len(rows) or len(class_sets) != 1:
        breakdowns = {}
    doc = eval_mod.render_report(rows, class_breakdowns=breakdowns or None)
    prefix = Path(args.out or out_dir / "report")
    Path(str(prefix) + ".txt").write_text(
        f"config_hash: {config_hash(config)}\n\n" + doc.text, encoding="utf-8"
    )
    Path(str(prefix) + ".csv").write_text(doc.csv, encoding="utf-8")
    _write_json(Path(str(prefix) + ".meta.json"), {
        "config_hash": config_hash(config),
        "rows": [name for name, _ in rows],
    })
    _run_log(out_dir, "report", f"{len(rows)} rows")
    print(doc.text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emopipe",
        description="Multimodal emotion recognition pipeline orchestration.",
    )
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--output-dir", dest="output_dir", help="artifact directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a corpus manifest")
    p.add_argument("--corpus")

    p = sub.add_parser("aggregate", help="aggregate raw annotation records")
    p.add_argument("--records")

    p = sub.add_parser("build-aux", help="construct auxiliary supervision")
    p.add_argument("--corpus")
    p.add_argument("--split", default="train")
    p.add_argument("--modalities")
    p.add_argument("--cache")
    p.add_argument("--out")

    p = sub.add_parser("schedule", help="emit a training manifest")
    p.add_argument("--corpus")
    p.add_argument("--aux")
    p.add_argument("--strategy", choices=["multi_stage", "hybrid"])
    p.add_argument("--steps", type=int)
    p.add_argument("--t0", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--task-granularity", dest="task_granularity",
                   choices=["main_sentiment", "main_emotion"])
    p.add_argument("--out")

    p = sub.add_parser("runspec", help="emit the adapter fine-tuning run spec")
    p.add_argument("--manifest")
    p.add_argument("--lr", type=float)
    p.add_argument("--out")

    p = sub.add_parser("predict", help="collect main-task predictions")
    p.add_argument("--corpus")
    p.add_argument("--split", default="test")
    p.add_argument("--task", choices=["sentiment", "emotion"], default="sentiment")
    p.add_argument("--out")

    p = sub.add_parser("evaluate", help="score predictions against gold labels")
    p.add_argument("--corpus")
    p.add_argument("--predictions", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--task", choices=["sentiment", "emotion"], default="sentiment")
    p.add_argument("--out")

    p = sub.add_parser("report", help="render metric tables")
    p.add_argument("metrics", nargs="+")
    p.add_argument("--names")
    p.add_argument("--out")

    return parser


_COMMANDS = {
    "validate": cmd_validate,
    "aggregate": cmd_aggregate,
    "build-aux": cmd_build_aux,
    "schedule": cmd_schedule,
    "runspec": cmd_runspec,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def run_command(argv) -> int:
    """Parse and execute one command; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = load_config(args.config)
        return _COMMANDS[args.command](config, args)
    except PipelineError as exc:
        print(json.dumps({"error": {"stage": exc.stage, "message": str(exc)}}),
              file=sys.stderr)
        return 1
    except Exception as exc:
        print(json.dumps({
            "error": {"stage": _stage_for(exc), "type": type(exc).__name__,
                      "message": str(exc)},
        }), file=sys.stderr)
        return 1


def main() -> None:
    raise SystemExit(run_command(sys.argv[1:]))
