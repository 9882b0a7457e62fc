"""Per-subject personalization adapter.

A single learnable token sequence c (N x C) plus one shared pair of
projections W_k, W_v (C x C each). The projected tokens are appended to
the keys and values of every self-attention layer, so one adapter
instance personalizes the whole transformer. Parameter count is
N*C + 2*C^2 (528,384 at C=512, N=8).
"""

import math

import torch
from torch import nn

from .errors import ShapeError


def count_adapter_params(C, N):
    """Number of stored parameters: N*C tokens plus two C x C projections."""
    return N * C + 2 * C * C


class AdapterParams(nn.Module):
    """Subject adapter: tokens plus shared key/value projections."""

    def __init__(self, model_dim, num_tokens):
        super().__init__()
        self.model_dim = model_dim
        self.num_tokens = num_tokens
        self.tokens = nn.Parameter(torch.zeros(num_tokens, model_dim))
        self.W_k = nn.Parameter(torch.zeros(model_dim, model_dim))
        self.W_v = nn.Parameter(torch.zeros(model_dim, model_dim))

    def extended_kv(self):
        """Projected extra keys and values, each (N, C)."""
        k_ext = self.tokens @ self.W_k.t()
        v_ext = self.tokens @ self.W_v.t()
        return k_ext, v_ext

    def num_params(self):
        return sum(p.numel() for p in self.parameters())


def init_adapter(model_dim, num_tokens, rng=None, token_std=0.02):
    """Fresh adapter: small Gaussian tokens and W_k, zero W_v.

    Zero W_v means the adapter contributes zero vectors to the attention
    values at the start of personalization, so training departs gently
    from the pre-trained prior. rng is a torch.Generator.
    """
    adapter = AdapterParams(model_dim, num_tokens)
    with torch.no_grad():
        adapter.tokens.normal_(0.0, token_std, generator=rng)
        adapter.W_k.normal_(0.0, token_std, generator=rng)
        adapter.W_v.zero_()
    return adapter


def adapted_attention(q, k, v, adapter, num_heads):
    """Scaled multi-head attention of q over [k, W_k c] and [v, W_v c].

    q, k, v: (..., L, C). With adapter=None or N=0 this is vanilla
    multi-head self-attention. Softmax normalizes over all L+N entries.
    """
    C = q.shape[-1]
    if k.shape != q.shape or v.shape != q.shape:
        raise ShapeError(f"q/k/v shapes differ: {q.shape}, {k.shape}, {v.shape}")
    if C % num_heads != 0:
        raise ShapeError(f"model dim {C} not divisible by {num_heads} heads")
    if adapter is not None and adapter.model_dim != C:
        raise ShapeError(
            f"adapter dim {adapter.model_dim} does not match model dim {C}"
        )

    if adapter is not None and adapter.num_tokens > 0:
        k_ext, v_ext = adapter.extended_kv()
        shape = k.shape[:-2] + k_ext.shape
        k = torch.cat([k, k_ext.expand(shape)], dim=-2)
        v = torch.cat([v, v_ext.expand(shape)], dim=-2)

    head_dim = C // num_heads
    L = q.shape[-2]
    S = k.shape[-2]

    def split(x, length):
        return x.reshape(x.shape[:-2] + (length, num_heads, head_dim)).transpose(-3, -2)

    qh = split(q, L)            # (..., heads, L, head_dim)
    kh = split(k, S)
    vh = split(v, S)
    logits = qh @ kh.transpose(-2, -1) / math.sqrt(head_dim)
    weights = torch.softmax(logits, dim=-1)
    out = weights @ vh          # (..., heads, L, head_dim)
    return out.transpose(-3, -2).reshape(q.shape[:-2] + (L, C))
