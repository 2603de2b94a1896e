"""Low-rank adapters over named linear projections of a frozen backbone."""

from __future__ import annotations

import math

import torch
from torch import nn


class TargetNotFoundError(ValueError):
    """A run-spec target matched no linear module in the backbone."""


class LoRALinear(nn.Module):
    """Wraps a frozen nn.Linear with a rank-r update scaled by alpha/r.

    The down projection is initialized like the base layer, the up
    projection at zero, so the wrapped module starts exactly equal to the
    base layer.
    """

    def __init__(self, base: nn.Linear, rank: int, alpha: int):
        super().__init__()
        self.base = base
        self.rank = rank
        self.scaling = alpha / rank
        self.lora_down = nn.Parameter(torch.empty(rank, base.in_features))
        self.lora_up = nn.Parameter(torch.zeros(base.out_features, rank))
        nn.init.kaiming_uniform_(self.lora_down, a=math.sqrt(5))
        for param in self.base.parameters():
            param.requires_grad_(False)

    def forward(self, x):
        return self.base(x) + (x @ self.lora_down.T @ self.lora_up.T) * self.scaling

    def adapter_parameters(self):
        return [self.lora_down, self.lora_up]


def _linear_names(model: nn.Module):
    return [name for name, module in model.named_modules()
            if isinstance(module, nn.Linear)]


def apply_lora(model: nn.Module, targets, rank: int, alpha: int):
    """Replace every linear under a target path with a LoRALinear.

    A qualified module name matches when it contains one of the target
    strings. Every target must match at least one linear; otherwise the
    run spec is wrong for this backbone and we fail fast, listing what the
    backbone actually exposes. All non-adapter parameters are frozen.

    Returns the sorted list of adapted module names.
    """
    matches = {target: [] for target in targets}
    for name, module in list(model.named_modules()):
        if not isinstance(module, nn.Linear):
            continue
        for target in targets:
            if target in name:
                matches[target].append(name)
    missing = [t for t, found in matches.items() if not found]
    if missing:
        raise TargetNotFoundError(
            f"targets {missing} match no linear module; "
            f"available linears: {_linear_names(model)}"
        )

    for param in model.parameters():
        param.requires_grad_(False)

    adapted = sorted({name for found in matches.values() for name in found})
    for name in adapted:
        parent_name, _, leaf = name.rpartition(".")
        parent = model.get_submodule(parent_name) if parent_name else model
        setattr(parent, leaf, LoRALinear(getattr(parent, leaf), rank, alpha))
    return adapted


def adapter_parameters(model: nn.Module):
    return [p for p in model.parameters() if p.requires_grad]


def adapter_parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in adapter_parameters(model))
