"""Adapter fine-tuning from training-manifest and run-spec files.

Consumes the orchestration pipeline's file formats verbatim: a JSONL
training manifest (header line + one instruction entry per step) and a
JSON run spec carrying adapter placement and optimizer settings. Training
is scheduling-agnostic: multi-stage curricula are realized purely by
manifest entry order.
"""

from .batching import TrainBatch, build_batches
from .lora import LoRALinear, adapter_parameter_count, apply_lora
from .manifest import ManifestEntry, load_manifest, load_runspec
from .tiny import ByteTokenizer, TinyCausalLM
from .train import TrainResult, compute_masked_loss, evaluate_loss, train

__version__ = "0.1.0"
