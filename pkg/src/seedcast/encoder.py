"""Structural encoder: variables as tokens, attention across the variable axis.

An input window x ∈ (L, N) is transposed so each variable's full
trajectory becomes one token, projected to a d-dimensional embedding,
refined by a stack of multi-head self-attention layers operating over
the N variables (not over time), and finally unfolded back onto a
temporal layout as a (N, D, L) feature map for patching.

All entry points accept a leading batch axis; unbatched inputs are
promoted and squeezed back transparently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .optim import Parameter
from .rng import uniform_fan_in
from .tensor import Tensor


@dataclass
class EncoderConfig:
    n_vars: int          # N
    window: int          # L
    d: int               # token embedding dim
    num_layers: int      # attention stack depth (0 = project + unfold only)
    num_heads: int
    ffn_dim: int
    channels: int        # D, per-variable feature channels after unfold

    def __post_init__(self):
        if min(self.n_vars, self.window, self.d, self.num_heads,
               self.ffn_dim, self.channels) < 1 or self.num_layers < 0:
            raise ConfigError(f"encoder extents must be positive: {self}")
        if self.d % self.num_heads != 0:
            raise ConfigError(
                f"encoder token dim {self.d} not divisible by {self.num_heads} heads")


def _heads_split(x: Tensor, num_heads: int) -> Tensor:
    """(B, N, d) -> (B, heads, N, d/heads)"""
    b, n, d = x.shape
    return T.transpose(x.reshape(b, n, num_heads, d // num_heads), (0, 2, 1, 3))


def _heads_join(x: Tensor) -> Tensor:
    """(B, heads, N, dh) -> (B, N, heads*dh)"""
    b, h, n, dh = x.shape
    return T.transpose(x, (0, 2, 1, 3)).reshape(b, n, h * dh)


def multi_head_attention(x: Tensor, wq, bq, wk, bk, wv, bv, wo, bo,
                         num_heads: int, mask: np.ndarray | None = None) -> Tensor:
    """Scaled dot-product attention over the second-to-last axis.

    x is (B, N, d); an optional additive mask (N, N) is applied to the
    score matrix before the softmax (used by the causal decoder; the
    variable encoder passes None because variables are an unordered set).
    """
    dh = x.shape[-1] // num_heads
    q = _heads_split(T.linear(x, wq, bq), num_heads)
    k = _heads_split(T.linear(x, wk, bk), num_heads)
    v = _heads_split(T.linear(x, wv, bv), num_heads)
    scores = T.matmul(q, T.transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(dh))
    if mask is not None:
        scores = scores + Tensor(mask)
    attn = T.softmax(scores, axis=-1)
    ctx = _heads_join(T.matmul(attn, v))
    return T.linear(ctx, wo, bo)


class VariableAttentionLayer:
    """Post-norm block: T <- LN(T + MHA(T)); T <- LN(T + FFN(T))."""

    def __init__(self, cfg: EncoderConfig, rng, prefix: str):
        d, f = cfg.d, cfg.ffn_dim
        self.num_heads = cfg.num_heads

        def lin(name, out_dim, in_dim):
            return (Parameter(f"{prefix}.{name}.w", uniform_fan_in(rng, (out_dim, in_dim), in_dim)),
                    Parameter(f"{prefix}.{name}.b", np.zeros(out_dim)))

        self.wq, self.bq = lin("attn.wq", d, d)
        self.wk, self.bk = lin("attn.wk", d, d)
        self.wv, self.bv = lin("attn.wv", d, d)
        self.wo, self.bo = lin("attn.wo", d, d)
        self.ln1_g = Parameter(f"{prefix}.ln1.gamma", np.ones(d))
        self.ln1_b = Parameter(f"{prefix}.ln1.beta", np.zeros(d))
        self.ffn_w1, self.ffn_b1 = lin("ffn.w1", f, d)
        self.ffn_w2, self.ffn_b2 = lin("ffn.w2", d, f)
        self.ln2_g = Parameter(f"{prefix}.ln2.gamma", np.ones(d))
        self.ln2_b = Parameter(f"{prefix}.ln2.beta", np.zeros(d))

    def parameters(self) -> list[Parameter]:
        return [self.wq, self.bq, self.wk, self.bk, self.wv, self.bv, self.wo, self.bo,
                self.ln1_g, self.ln1_b, self.ffn_w1, self.ffn_b1, self.ffn_w2, self.ffn_b2,
                self.ln2_g, self.ln2_b]

    def __call__(self, tokens: Tensor) -> Tensor:
        attn = multi_head_attention(tokens, self.wq, self.bq, self.wk, self.bk,
                                    self.wv, self.bv, self.wo, self.bo, self.num_heads)
        tokens = T.layer_norm(tokens + attn, self.ln1_g, self.ln1_b)
        hidden = T.linear(T.relu(T.linear(tokens, self.ffn_w1, self.ffn_b1)),
                          self.ffn_w2, self.ffn_b2)
        return T.layer_norm(tokens + hidden, self.ln2_g, self.ln2_b)


class StructuralEncoder:
    """temporal_project -> num_layers x variable attention -> temporal_unfold."""

    def __init__(self, cfg: EncoderConfig, rng, prefix: str = "encoder"):
        self.cfg = cfg
        self.proj_w = Parameter(f"{prefix}.project.w",
                                uniform_fan_in(rng, (cfg.d, cfg.window), cfg.window))
        self.proj_b = Parameter(f"{prefix}.project.b", np.zeros(cfg.d))
        self.layers = [VariableAttentionLayer(cfg, rng, f"{prefix}.layers.{i}")
                       for i in range(cfg.num_layers)]
        out = cfg.channels * cfg.window
        self.unfold_w = Parameter(f"{prefix}.unfold.w", uniform_fan_in(rng, (out, cfg.d), cfg.d))
        self.unfold_b = Parameter(f"{prefix}.unfold.b", np.zeros(out))

    def parameters(self) -> list[Parameter]:
        out = [self.proj_w, self.proj_b]
        for layer in self.layers:
            out.extend(layer.parameters())
        out += [self.unfold_w, self.unfold_b]
        return out

    def temporal_project(self, x_transposed: Tensor) -> Tensor:
        """(..., N, L) trajectories -> (..., N, d) variable tokens."""
        if x_transposed.shape[-1] != self.cfg.window:
            raise ShapeError(f"expected trajectories of length {self.cfg.window}, "
                             f"got {x_transposed.shape}")
        return T.linear(x_transposed, self.proj_w, self.proj_b)

    def temporal_unfold(self, tokens: Tensor) -> Tensor:
        """(..., N, d) tokens -> (..., N, D, L) feature map via a shared linear map."""
        flat = T.linear(tokens, self.unfold_w, self.unfold_b)
        return flat.reshape(*flat.shape[:-1], self.cfg.channels, self.cfg.window)

    def encode(self, x: Tensor) -> Tensor:
        """Window(s) (B, L, N) or (L, N) -> feature map (B, N, D, L) or (N, D, L)."""
        squeeze = x.ndim == 2
        if squeeze:
            x = x.reshape(1, *x.shape)
        if x.shape[1] != self.cfg.window or x.shape[2] != self.cfg.n_vars:
            raise ShapeError(f"expected windows shaped (B, {self.cfg.window}, "
                             f"{self.cfg.n_vars}), got {x.shape}")
        tokens = self.temporal_project(T.transpose(x, (0, 2, 1)))
        for layer in self.layers:
            tokens = layer(tokens)
        feats = self.temporal_unfold(tokens)
        return feats.reshape(*feats.shape[1:]) if squeeze else feats
