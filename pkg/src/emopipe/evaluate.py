"""Prediction collection, hierarchical decoding, and the metric suite.

Conventions for non-conforming outputs are explicit rather than dropped:
an unparseable prediction scores as ``invalid``, which counts in the
accuracy denominator, appears as its own confusion column, and creates
false negatives only. Macro-F1 averages over every taxonomy class with
the 0/0 -> 0 rule, so absent classes pull the average down exactly as a
long-tailed report should.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .labels import EMOTIONS, INVALID, SENTIMENT_EMOTION_COMPAT, SENTIMENTS
from .outparse import ParsedOutput, parse_output
from .prompts import InstructionType, render_prompt
from .gateway import GatewayError


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    task: str                   # "sentiment" | "emotion"
    raw_output: str
    parsed: ParsedOutput
    final_sentiment: str
    final_emotion: str | None = None

    def to_record(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "task": self.task,
            "raw_output": self.raw_output,
            "parsed": self.parsed.to_record(),
            "final_sentiment": self.final_sentiment,
            "final_emotion": self.final_emotion,
        }

    @staticmethod
    def from_record(record: dict) -> "PredictionRecord":
        return PredictionRecord(
            sample_id=record["sample_id"],
            task=record["task"],
            raw_output=record.get("raw_output", ""),
            parsed=ParsedOutput.from_record(record.get("parsed", {})),
            final_sentiment=record["final_sentiment"],
            final_emotion=record.get("final_emotion"),
        )


@dataclass
class MetricsReport:
    task: str = ""
    n: int = 0
    accuracy: float = 0.0
    macro_f1: float = 0.0
    weighted_f1: float = 0.0
    per_class_f1: dict = field(default_factory=dict)
    confusion: dict = field(default_factory=dict)  # rows gold, cols taxonomy+invalid
    invalid_rate: float = 0.0

    def to_record(self) -> dict:
        return {
            "task": self.task,
            "n": self.n,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "per_class_f1": self.per_class_f1,
            "confusion": self.confusion,
            "invalid_rate": self.invalid_rate,
        }

    @staticmethod
    def from_record(record: dict) -> "MetricsReport":
        return MetricsReport(**record)


def decode_hierarchical(parsed: ParsedOutput, task: str,
                        compat: dict = SENTIMENT_EMOTION_COMPAT):
    """Post-process a main-task parse into final labels.

    Sentiment passes through. For the emotion task, an emotion that the
    predicted sentiment cannot support is replaced by invalid, and an
    invalid sentiment forces an invalid emotion.
    """
    sentiment = parsed.sentiment
    if task == "sentiment":
        return sentiment, None
    if task != "emotion":
        raise EvaluationError(f"unknown task {task!r}")
    if sentiment == INVALID:
        return sentiment, INVALID
    emotion = parsed.emotion if parsed.emotion is not None else INVALID
    if emotion != INVALID and emotion not in compat.get(sentiment, frozenset()):
        emotion = INVALID
    return sentiment, emotion


def compute_metrics(gold, pred, taxonomy, task: str = "") -> MetricsReport:
    """Accuracy, macro/weighted F1, per-class F1, and the confusion matrix.

    ``gold`` values must lie in ``taxonomy``; ``pred`` values may also be
    ``invalid``. Per-class divisions use the 0/0 -> 0 convention.
    """
    gold = list(gold)
    pred = list(pred)
    if len(gold) != len(pred):
        raise EvaluationError(f"length mismatch: {len(gold)} gold vs {len(pred)} pred")
    if not gold:
        raise EvaluationError("empty label lists")
    taxonomy = tuple(taxonomy)
    outside = sorted({g for g in gold if g not in taxonomy})
    if outside:
        raise EvaluationError(f"gold labels outside taxonomy: {outside}")

    columns = taxonomy + (INVALID,)
    confusion = {g: {c: 0 for c in columns} for g in taxonomy}
    for g, p in zip(gold, pred):
        confusion[g][p if p in taxonomy else INVALID] += 1

    n = len(gold)
    per_class_f1 = {}
    weighted_sum = 0.0
    for cls in taxonomy:
        tp = confusion[cls][cls]
        fp = sum(confusion[g][cls] for g in taxonomy if g != cls)
        fn = sum(count for col, count in confusion[cls].items() if col != cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class_f1[cls] = f1
        weighted_sum += f1 * sum(confusion[cls].values())

    accuracy = sum(confusion[c][c] for c in taxonomy) / n
    invalid_rate = sum(confusion[g][INVALID] for g in taxonomy) / n
    return MetricsReport(
        task=task,
        n=n,
        accuracy=accuracy,
        macro_f1=sum(per_class_f1.values()) / len(taxonomy),
        weighted_f1=weighted_sum / n,
        per_class_f1=per_class_f1,
        confusion=confusion,
        invalid_rate=invalid_rate,
    )


def taxonomy_for(task: str):
    if task == "sentiment":
        return SENTIMENTS
    if task == "emotion":
        return EMOTIONS
    raise EvaluationError(f"unknown task {task!r}")


def _instruction_for(task: str) -> InstructionType:
    return (InstructionType.MAIN_SENTIMENT if task == "sentiment"
            else InstructionType.MAIN_EMOTION)


def collect_predictions(corpus, split: str, gw, task: str, options,
                        parallelism: int = 1,
                        language: str = "Indonesian"):
    """Run the main instruction over one split and decode the outputs.

    Gateway failures become invalid predictions with diagnostics; nothing
    is dropped. Output is ordered by sample id.
    """
    samples = sorted(corpus.by_split(split), key=lambda s: s.id)
    if not samples:
        raise EvaluationError(f"split {split!r} is empty")
    itype = _instruction_for(task)
    bundles = [render_prompt(s, itype, language=language) for s in samples]
    results = gw.complete_batch(bundles, options, parallelism=parallelism)

    records = []
    for sample, result in zip(samples, results):
        if isinstance(result, GatewayError):
            parsed = ParsedOutput(raw="", reasons=[f"gateway_error:{result}"])
            raw = ""
        else:
            raw = result.text
            parsed = parse_output(itype, raw)
        final_sentiment, final_emotion = decode_hierarchical(parsed, task)
        records.append(
            PredictionRecord(
                sample_id=sample.id,
                task=task,
                raw_output=raw,
                parsed=parsed,
                final_sentiment=final_sentiment,
                final_emotion=final_emotion,
            )
        )
    return records


def save_predictions(records, path) -> None:
    lines = [json.dumps(r.to_record(), ensure_ascii=False) for r in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_predictions(path):
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(PredictionRecord.from_record(json.loads(line)))
    return records


def evaluate_predictions(corpus, split: str, records, task: str) -> MetricsReport:
    """Join predictions to gold labels over one split and compute metrics."""
    by_id = {r.sample_id: r for r in records}
    samples = sorted(corpus.by_split(split), key=lambda s: s.id)
    if not samples:
        raise EvaluationError(f"split {split!r} is empty")
    gold, pred = [], []
    for sample in samples:
        record = by_id.get(sample.id)
        if record is None:
            raise EvaluationError(f"no prediction for sample {sample.id!r}")
        if task == "sentiment":
            gold.append(sample.sentiment_gt["multimodal"])
            pred.append(record.final_sentiment)
        else:
            if sample.emotion_gt is None:
                raise EvaluationError(f"sample {sample.id!r} has no emotion label")
            gold.append(sample.emotion_gt)
            pred.append(record.final_emotion if record.final_emotion else INVALID)
    return compute_metrics(gold, pred, taxonomy_for(task), task=task)


@dataclass(frozen=True)
class ReportDocument:
    text: str
    csv: str


def render_report(rows, class_breakdowns: dict | None = None) -> ReportDocument:
    """Render aligned plain-text and comma-delimited report tables.

    ``rows`` is a list of (model name, MetricsReport). Numbers print to
    three decimals; with two or more rows the best value in each column
    is flagged with a trailing ``*``. ``class_breakdowns`` optionally maps
    model name -> {class: f1} for a class-by-model matrix.
    """
    rows = list(rows)
    if not rows:
        raise EvaluationError("no reports to render")
    names = [name for name, _ in rows]
    values = [(r.accuracy, r.macro_f1, r.weighted_f1) for _, r in rows]
    flag_best = len(rows) > 1
    best = [max(col) for col in zip(*values)]

    width = max(len("Model"), max(len(n) for n in names))
    header = ["Accuracy", "Macro-F1", "Weighted-F1"]
    text_lines = [f"{'Model':<{width}}  " + "  ".join(header)]
    csv_lines = ["model,accuracy,macro_f1,weighted_f1"]
    for name, vals in zip(names, values):
        cells = []
        for j, value in enumerate(vals):
            mark = "*" if flag_best and value == best[j] else ""
            cells.append(f"{value:.3f}{mark}")
        text_lines.append(f"{name:<{width}}  " + "  ".join(cells))
        csv_lines.append(name + "," + ",".join(f"{value:.6f}" for value in vals))

    if class_breakdowns:
        classes = list(next(iter(class_breakdowns.values())).keys())
        text_lines.append("")
        text_lines.append(f"{'Class':<12}  " + "  ".join(f"{n}" for n in names))
        csv_lines.append("")
        csv_lines.append("class," + ",".join(names))
        for cls in classes:
            scores = [class_breakdowns[name].get(cls, 0.0) for name in names]
            top = max(scores)
            cells = [
                f"{score:.3f}" + ("*" if flag_best and score == top else "")
                for score in scores
            ]
            text_lines.append(f"{cls:<12}  " + "  ".join(cells))
            csv_lines.append(cls + "," + ",".join(f"{s:.6f}" for s in scores))

    return ReportDocument(
        text="\n".join(text_lines) + "\n",
        csv="\n".join(csv_lines) + "\n",
    )
