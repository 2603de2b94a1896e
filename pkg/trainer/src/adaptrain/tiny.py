"""Tiny causal LM stand-in for desk-scale runs.

Exposes the same module naming scheme the run spec targets on the real
omni-modal backbone (``text_encoder.attn`` and ``thinker.attn``), so the
adapter-placement code path is identical at both scales. Text-only: the
trainer downgrades media attachments when the backbone does not accept
them.
"""

from __future__ import annotations

import torch
from torch import nn


class ByteTokenizer:
    """UTF-8 byte-level tokenizer; ids 0..255 bytes, 256 is BOS."""

    bos_id = 256

    @property
    def vocab_size(self) -> int:
        return 257

    def encode(self, text: str):
        return list(text.encode("utf-8"))


class TinyAttention(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.q_proj = nn.Linear(dim, dim, bias=False)
        self.k_proj = nn.Linear(dim, dim, bias=False)
        self.v_proj = nn.Linear(dim, dim, bias=False)
        self.o_proj = nn.Linear(dim, dim, bias=False)
        self.scale = dim ** -0.5

    def forward(self, x):
        q, k, v = self.q_proj(x), self.k_proj(x), self.v_proj(x)
        scores = (q @ k.transpose(-2, -1)) * self.scale
        t = x.size(-2)
        causal = torch.triu(torch.ones(t, t, dtype=torch.bool, device=x.device), 1)
        scores = scores.masked_fill(causal, float("-inf"))
        return self.o_proj(torch.softmax(scores, dim=-1) @ v)


class TinyBlock(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.attn = TinyAttention(dim)
        self.norm1 = nn.LayerNorm(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, dim * 2), nn.GELU(), nn.Linear(dim * 2, dim)
        )

    def forward(self, x):
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class TinyCausalLM(nn.Module):
    """Two blocks named like the big backbone's adapted submodules."""

    accepts_media = False

    def __init__(self, vocab_size: int = 257, dim: int = 64,
                 max_len: int = 512, seed: int = 0):
        super().__init__()
        torch.manual_seed(seed)
        self.embed = nn.Embedding(vocab_size, dim)
        self.pos_embed = nn.Embedding(max_len, dim)
        self.text_encoder = TinyBlock(dim)
        self.thinker = TinyBlock(dim)
        self.lm_head = nn.Linear(dim, vocab_size, bias=False)

    def forward(self, input_ids):
        positions = torch.arange(input_ids.size(-1), device=input_ids.device)
        x = self.embed(input_ids) + self.pos_embed(positions)
        x = self.text_encoder(x)
        x = self.thinker(x)
        return self.lm_head(x)
