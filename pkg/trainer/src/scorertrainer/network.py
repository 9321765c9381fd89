"""Attention-based move scorer, training-side implementation.

The forward pass mirrors the inference engine exactly so exported
weights are drop-in: variable/value pairs share one embedding table;
move embeddings attend over the raw state embeddings in every attention
layer (keys and values are never re-encoded); the contextualized move
vector is concatenated with its raw embedding and pushed through a ReLU
encoder with residual blocks onto a single sigmoid logit per move.  All
matrices act on row vectors (``h @ W``), matching the weight-file
orientation.  Dropout sits on the dense encoder activations and is only
active in training mode.
"""
from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn


def _matrix(rows: int, cols: int) -> nn.Parameter:
    p = nn.Parameter(torch.empty(rows, cols))
    nn.init.xavier_uniform_(p)
    return p


def _bias(size: int) -> nn.Parameter:
    return nn.Parameter(torch.zeros(size))


class _Attention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.wq = _matrix(d_model, d_model)
        self.wk = _matrix(d_model, d_model)
        self.wv = _matrix(d_model, d_model)
        self.wo = _matrix(d_model, d_model)
        self.bq = _bias(d_model)
        self.bk = _bias(d_model)
        self.bv = _bias(d_model)
        self.bo = _bias(d_model)

    def forward(self, h: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
        b, m, d = h.shape
        n = s.shape[1]
        nh, dh = self.n_heads, self.d_head
        q = (h @ self.wq + self.bq).view(b, m, nh, dh).transpose(1, 2)
        k = (s @ self.wk + self.bk).view(b, n, nh, dh).permute(0, 2, 3, 1)
        v = (s @ self.wv + self.bv).view(b, n, nh, dh).transpose(1, 2)
        att = torch.softmax(q @ k / math.sqrt(dh), dim=-1)
        ctx = (att @ v).transpose(1, 2).reshape(b, m, d)
        return ctx @ self.wo + self.bo


class _FfnBlock(nn.Module):
    def __init__(self, ffn_dim: int, dropout: float):
        super().__init__()
        self.w1 = _matrix(ffn_dim, ffn_dim)
        self.b1 = _bias(ffn_dim)
        self.w2 = _matrix(ffn_dim, ffn_dim)
        self.b2 = _bias(ffn_dim)
        self.drop = nn.Dropout(dropout)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        inner = self.drop(torch.relu(h @ self.w1 + self.b1))
        return torch.relu(h + inner @ self.w2 + self.b2)


class MoveScorerNet(nn.Module):
    def __init__(
        self,
        num_tokens: int,
        d_model: int,
        n_heads: int,
        n_attn_layers: int,
        n_ffn_blocks: int,
        ffn_dim: int,
        dropout: float,
    ):
        super().__init__()
        if d_model % n_heads != 0:
            raise ValueError(f"n_heads {n_heads} must divide d_model {d_model}")
        self.d_model = d_model
        self.n_heads = n_heads
        self.n_attn_layers = n_attn_layers
        self.n_ffn_blocks = n_ffn_blocks
        self.ffn_dim = ffn_dim
        self.embed = _matrix(num_tokens, d_model)
        self.attn = nn.ModuleList(_Attention(d_model, n_heads) for _ in range(n_attn_layers))
        self.enc_in_w = _matrix(2 * d_model, ffn_dim)
        self.enc_in_b = _bias(ffn_dim)
        self.enc_drop = nn.Dropout(dropout)
        self.blocks = nn.ModuleList(_FfnBlock(ffn_dim, dropout) for _ in range(n_ffn_blocks))
        self.head_w = _matrix(ffn_dim, 1)
        self.head_b = _bias(1)

    def forward(self, state_tokens: torch.Tensor, move_tokens: torch.Tensor) -> torch.Tensor:
        """Logits for each move slot; callers mask padded slots.

        Moves never attend to each other, so padded slots cannot leak
        into real ones.
        """
        s = self.embed[state_tokens]  # [B, n, d]
        m0 = self.embed[move_tokens]  # [B, M, d]
        h = m0
        for layer in self.attn:
            h = layer(h, s)
        z = torch.cat([h, m0], dim=-1)
        h = self.enc_drop(torch.relu(z @ self.enc_in_w + self.enc_in_b))
        for block in self.blocks:
            h = block(h)
        return (h @ self.head_w + self.head_b).squeeze(-1)

    def export_tensors(self) -> dict[str, np.ndarray]:
        """Weight-file tensor directory, float32, engine naming."""
        out = {"embed": self.embed}
        for l, layer in enumerate(self.attn):
            for name in ("wq", "wk", "wv", "wo", "bq", "bk", "bv", "bo"):
                out[f"attn.{l}.{name}"] = getattr(layer, name)
        out["enc.in.w"] = self.enc_in_w
        out["enc.in.b"] = self.enc_in_b
        for k, block in enumerate(self.blocks):
            out[f"enc.{k}.w1"] = block.w1
            out[f"enc.{k}.b1"] = block.b1
            out[f"enc.{k}.w2"] = block.w2
            out[f"enc.{k}.b2"] = block.b2
        out["head.w"] = self.head_w
        out["head.b"] = self.head_b
        return {
            name: p.detach().cpu().numpy().astype(np.float32) for name, p in out.items()
        }
