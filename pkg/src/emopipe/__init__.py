"""Toolkit for multimodal emotion recognition pipelines.

Turns a multimodal corpus plus any chat-completion endpoint into
consistency-checked auxiliary supervision, deterministic instruction-
scheduled training manifests with an adapter run spec, and evaluation
reports with hierarchical sentiment-to-emotion decoding.
"""

from .corpus import Corpus, Sample, ValidationReport, load_corpus, split_corpus, validate_corpus
from .annotate import aggregate_emotion, aggregate_sentiment, agreement_rate
from .prompts import InstructionType, PromptBundle, render_prompt, template_set_hash
from .outparse import ParsedOutput, extract_json, normalize_emotion, normalize_sentiment, parse_output
from .gateway import Gateway, GenOptions, HttpTransport, MockTransport, RawCompletion
from .supervision import AuxSupervisionRecord, ConstructorConfig, build_supervision, construct_one
from .schedule import SchedulePlan, TrainingManifest, emit_runspec, plan_hybrid, plan_multistage
from .evaluate import (
    MetricsReport,
    PredictionRecord,
    collect_predictions,
    compute_metrics,
    decode_hierarchical,
    render_report,
)

__version__ = "0.1.0"
