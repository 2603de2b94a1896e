"""Training loop: masked negative log-likelihood over adapter parameters.

The run spec decides adapter placement, optimizer, schedule, and
accumulation; the manifest decides what each step trains on, in order.
Loss is the mean NLL over target tokens only; prompt positions carry a
zero mask and contribute exactly zero loss and zero gradient.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch import nn

from .batching import build_batches
from .lora import adapter_parameters, apply_lora

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    losses: list = field(default_factory=list)   # one value per optimizer step
    adapted_modules: list = field(default_factory=list)
    n_batches: int = 0
    checkpoint_path: str | None = None
    loss_curve_path: str | None = None

    @property
    def initial_loss(self) -> float:
        return self.losses[0]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


def compute_masked_loss(model: nn.Module, batch):
    """Mean NLL of the target tokens under the causal LM.

    Returns (loss, n_target_tokens). Positions with a zero mask are
    excluded from the sum entirely, so their labels cannot influence the
    value or the gradient.
    """
    ids = batch.input_ids.unsqueeze(0)
    logits = model(ids[:, :-1])
    log_probs = torch.log_softmax(logits, dim=-1)
    token_logp = log_probs.gather(-1, ids[:, 1:].unsqueeze(-1)).squeeze(-1)
    mask = batch.loss_mask[1:].unsqueeze(0)
    n_tokens = mask.sum()
    if n_tokens.item() == 0:
        raise ValueError(f"batch for {batch.sample_id} has no target tokens")
    loss = -(token_logp * mask).sum() / n_tokens
    return loss, int(n_tokens.item())


def evaluate_loss(model: nn.Module, batches) -> float:
    """Token-weighted mean NLL over several batches, no gradients."""
    total, count = 0.0, 0
    with torch.no_grad():
        for batch in batches:
            loss, n_tokens = compute_masked_loss(model, batch)
            total += loss.item() * n_tokens
            count += n_tokens
    if count == 0:
        raise ValueError("no target tokens to evaluate")
    return total / count


def _save_adapters(model: nn.Module, path: Path) -> None:
    state = {
        name: param.detach().cpu()
        for name, param in model.named_parameters() if param.requires_grad
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(state, tmp)
    os.replace(tmp, path)


def train(runspec: dict, manifest_entries, model: nn.Module, tokenizer,
          out_dir=None, max_steps: int | None = None,
          max_len: int = 1024) -> TrainResult:
    """Fine-tune adapters per the run spec over the manifest, in order.

    ``max_steps`` caps optimizer steps for desk-scale runs; otherwise the
    run spec's epochs field decides how many passes to make. Attachments
    are forwarded only when the backbone accepts media; otherwise training
    proceeds on the prompt text with a logged capability downgrade.
    """
    lora_cfg = runspec["lora"]
    adapted = apply_lora(model, lora_cfg["targets"],
                         rank=int(lora_cfg["rank"]), alpha=int(lora_cfg["alpha"]))
    log.info("adapters on %d modules: %s", len(adapted), adapted)

    if not getattr(model, "accepts_media", False):
        if any(batch_has_media for batch_has_media in
               (bool(e.attachments) for e in manifest_entries)):
            log.warning("backbone accepts no media; training on prompt text only")

    batches = list(build_batches(manifest_entries, tokenizer, max_len=max_len))
    if not batches:
        raise ValueError("no trainable batches in manifest")

    grad_accum = int(runspec["batch"]["grad_accum"])
    epochs = int(runspec.get("epochs", 1))
    optimizer_cfg = runspec["optimizer"]
    if optimizer_cfg.get("name", "adamw") != "adamw":
        raise ValueError(f"unsupported optimizer {optimizer_cfg.get('name')!r}")
    params = adapter_parameters(model)
    optimizer = torch.optim.AdamW(params, lr=float(optimizer_cfg["lr"]))

    if max_steps is not None:
        planned_steps = max_steps
    else:
        planned_steps = max(1, (len(batches) * epochs) // grad_accum)
    scheduler = None
    if optimizer_cfg.get("schedule") == "cosine":
        scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(
            optimizer, T_max=planned_steps)

    def micro_batches():
        # Bounded by epochs normally; cycles indefinitely under max_steps.
        epoch = 0
        while max_steps is not None or epoch < epochs:
            epoch += 1
            yield from batches

    losses = []
    window = []
    optimizer.zero_grad()
    for batch in micro_batches():
        loss, _ = compute_masked_loss(model, batch)
        (loss / grad_accum).backward()
        window.append(loss.item())
        if len(window) == grad_accum:
            optimizer.step()
            if scheduler is not None:
                scheduler.step()
            optimizer.zero_grad()
            losses.append(sum(window) / len(window))
            window = []
            if len(losses) >= planned_steps:
                break
    if window:
        # Leftover micro-batches smaller than one accumulation window.
        optimizer.step()
        losses.append(sum(window) / len(window))

    result = TrainResult(losses=losses, adapted_modules=adapted,
                         n_batches=len(batches))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        checkpoint = out_dir / "adapters.pt"
        _save_adapters(model, checkpoint)
        curve = out_dir / "loss_curve.csv"
        with curve.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["step", "loss"])
            for i, value in enumerate(losses, start=1):
                writer.writerow([i, f"{value:.6f}"])
        result.checkpoint_path = str(checkpoint)
        result.loss_curve_path = str(curve)
    return result
