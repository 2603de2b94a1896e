"""Token batches with loss masks covering exactly the target tokens."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import torch

log = logging.getLogger(__name__)


@dataclass
class TrainBatch:
    input_ids: torch.Tensor   # [T] long, prompt followed by target
    loss_mask: torch.Tensor   # [T] float, 1.0 on target positions only
    sample_id: str
    step: int
    instruction_type: str

    @property
    def n_target_tokens(self) -> int:
        return int(self.loss_mask.sum().item())


def build_batches(entries, tokenizer, max_len: int = 1024):
    """Yield one TrainBatch per manifest entry, preserving step order.

    Entries whose prompt+target exceed ``max_len`` tokens are skipped with
    a logged warning rather than truncated, so the loss mask always covers
    the full target.
    """
    skipped = 0
    for entry in entries:
        prompt_ids = tokenizer.encode(entry.prompt_text)
        target_ids = tokenizer.encode(entry.target_text)
        total = len(prompt_ids) + len(target_ids)
        if total > max_len:
            skipped += 1
            log.warning("skipping %s at step %d: %d tokens exceed context %d",
                        entry.sample_id, entry.step, total, max_len)
            continue
        ids = torch.tensor(prompt_ids + target_ids, dtype=torch.long)
        mask = torch.zeros(total, dtype=torch.float32)
        mask[len(prompt_ids):] = 1.0
        yield TrainBatch(
            input_ids=ids,
            loss_mask=mask,
            sample_id=entry.sample_id,
            step=entry.step,
            instruction_type=entry.instruction_type,
        )
    if skipped:
        log.warning("%d entries skipped for context overflow", skipped)
