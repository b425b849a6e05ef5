"""Frozen causal decoder and the learned forecast head.

The decoder is a pre-norm, decoder-only transformer whose parameters are
created once from a dedicated seed and never updated: every parameter
carries frozen=True, so the optimizer skips them while gradients still
flow through the decoder's operations to whatever produced its input.
A content digest of the parameters certifies the freeze after training.

The causal mask adds -1e30 (finite, so the softmax input check stays
meaningful) to future positions; the value is large enough that masked
scores collapse to exactly -1e30 and their softmax weights underflow to
exactly zero, which is what makes the causality tests bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .checkpoint import digest
from .encoder import multi_head_attention
from .errors import ConfigError, ShapeError
from .optim import Parameter
from .rng import make_rng, scaled_normal, uniform_fan_in
from .tensor import Tensor

MASK_VALUE = -1e30
BYTE_VOCAB = 256


@dataclass
class DecoderConfig:
    d_lm: int
    num_layers: int
    num_heads: int
    ffn_dim: int
    init_seed: int

    def __post_init__(self):
        if min(self.d_lm, self.num_layers, self.num_heads, self.ffn_dim) < 1:
            raise ConfigError(f"decoder extents must be positive: {self}")
        if self.d_lm % self.num_heads != 0:
            raise ConfigError(
                f"decoder dim {self.d_lm} not divisible by {self.num_heads} heads")


def causal_mask(t_seq: int) -> np.ndarray:
    return np.triu(np.full((t_seq, t_seq), MASK_VALUE), k=1)


class _DecoderBlock:
    """Pre-norm block: h += attn(LN(h)) ; h += ffn(LN(h))."""

    def __init__(self, cfg: DecoderConfig, rng, prefix: str):
        d, f = cfg.d_lm, cfg.ffn_dim
        self.num_heads = cfg.num_heads

        def lin(name, out_dim, in_dim):
            return (Parameter(f"{prefix}.{name}.w",
                              uniform_fan_in(rng, (out_dim, in_dim), in_dim), frozen=True),
                    Parameter(f"{prefix}.{name}.b", np.zeros(out_dim), frozen=True))

        self.ln1_g = Parameter(f"{prefix}.ln1.gamma", np.ones(d), frozen=True)
        self.ln1_b = Parameter(f"{prefix}.ln1.beta", np.zeros(d), frozen=True)
        self.wq, self.bq = lin("attn.wq", d, d)
        self.wk, self.bk = lin("attn.wk", d, d)
        self.wv, self.bv = lin("attn.wv", d, d)
        self.wo, self.bo = lin("attn.wo", d, d)
        self.ln2_g = Parameter(f"{prefix}.ln2.gamma", np.ones(d), frozen=True)
        self.ln2_b = Parameter(f"{prefix}.ln2.beta", np.zeros(d), frozen=True)
        self.ffn_w1, self.ffn_b1 = lin("ffn.w1", f, d)
        self.ffn_w2, self.ffn_b2 = lin("ffn.w2", d, f)

    def parameters(self) -> list[Parameter]:
        return [self.ln1_g, self.ln1_b, self.wq, self.bq, self.wk, self.bk,
                self.wv, self.bv, self.wo, self.bo, self.ln2_g, self.ln2_b,
                self.ffn_w1, self.ffn_b1, self.ffn_w2, self.ffn_b2]

    def __call__(self, h: Tensor, mask: np.ndarray) -> Tensor:
        normed = T.layer_norm(h, self.ln1_g, self.ln1_b)
        h = h + multi_head_attention(normed, self.wq, self.bq, self.wk, self.bk,
                                     self.wv, self.bv, self.wo, self.bo,
                                     self.num_heads, mask=mask)
        normed = T.layer_norm(h, self.ln2_g, self.ln2_b)
        return h + T.linear(T.relu(T.linear(normed, self.ffn_w1, self.ffn_b1)),
                            self.ffn_w2, self.ffn_b2)


class FrozenDecoder:
    def __init__(self, cfg: DecoderConfig, prefix: str = "decoder"):
        self.cfg = cfg
        rng = make_rng(cfg.init_seed)
        self.byte_embedding = Parameter(f"{prefix}.byte_embedding",
                                        scaled_normal(rng, (BYTE_VOCAB, cfg.d_lm)), frozen=True)
        self.blocks = [_DecoderBlock(cfg, rng, f"{prefix}.layers.{i}")
                       for i in range(cfg.num_layers)]
        self.final_g = Parameter(f"{prefix}.final_norm.gamma", np.ones(cfg.d_lm), frozen=True)
        self.final_b = Parameter(f"{prefix}.final_norm.beta", np.zeros(cfg.d_lm), frozen=True)

    def parameters(self) -> list[Parameter]:
        out = [self.byte_embedding]
        for block in self.blocks:
            out.extend(block.parameters())
        out += [self.final_g, self.final_b]
        return out

    def decode(self, tokens: Tensor) -> Tensor:
        """Causal forward pass: (B, S, d_LM) or (S, d_LM) -> same-shape hiddens."""
        squeeze = tokens.ndim == 2
        if squeeze:
            tokens = tokens.reshape(1, *tokens.shape)
        if tokens.shape[-1] != self.cfg.d_lm:
            raise ShapeError(f"decoder expects embedding dim {self.cfg.d_lm}, "
                             f"got {tokens.shape}")
        mask = causal_mask(tokens.shape[1])
        h = tokens
        for block in self.blocks:
            h = block(h, mask)
        h = T.layer_norm(h, self.final_g, self.final_b)
        return h.reshape(*h.shape[1:]) if squeeze else h

    def digest(self) -> str:
        return digest(self.parameters())


def decode(seq, decoder: FrozenDecoder) -> Tensor:
    tokens = seq.tokens if hasattr(seq, "tokens") else seq
    return decoder.decode(tokens)


def freeze_check(decoder: FrozenDecoder, digest_before: str) -> bool:
    return decoder.digest() == digest_before


# ---------------------------------------------------------------------------
# forecast head and generation


class OutputHead:
    """Affine map from a decoder hidden state to forecast values.

    In autoregressive mode the head emits one N-vector per generated
    step; in single-shot mode it emits the whole H x N forecast from the
    final hidden state.
    """

    def __init__(self, n_vars: int, d_lm: int, rng, horizon: int | None = None,
                 prefix: str = "head"):
        self.n_vars = n_vars
        self.single_shot_horizon = horizon
        out_dim = n_vars if horizon is None else horizon * n_vars
        self.w_out = Parameter(f"{prefix}.w_out", uniform_fan_in(rng, (out_dim, d_lm), d_lm))
        self.b_out = Parameter(f"{prefix}.b_out", np.zeros(out_dim))

    def parameters(self) -> list[Parameter]:
        return [self.w_out, self.b_out]

    def __call__(self, h: Tensor) -> Tensor:
        return project_output(h, self)


def project_output(h: Tensor, head: OutputHead) -> Tensor:
    if h.shape[-1] != head.w_out.shape[1]:
        raise ShapeError(f"hidden dim {h.shape[-1]} does not match head "
                         f"input {head.w_out.shape[1]}")
    flat = h.reshape(1, -1) if h.ndim == 1 else h
    out = T.linear(flat, head.w_out, head.b_out)
    return out.reshape(out.shape[-1]) if h.ndim == 1 else out


class ValueEmbedding:
    """Learned map from predicted values back into the embedding space,
    used to feed each autoregressive step's output in as the next token."""

    def __init__(self, n_vars: int, d_lm: int, rng, prefix: str = "head"):
        self.w = Parameter(f"{prefix}.value_embed.w", uniform_fan_in(rng, (d_lm, n_vars), n_vars))
        self.b = Parameter(f"{prefix}.value_embed.b", np.zeros(d_lm))

    def parameters(self) -> list[Parameter]:
        return [self.w, self.b]

    def __call__(self, values: Tensor) -> Tensor:
        return T.linear(values, self.w, self.b)


@dataclass
class GenerationConfig:
    horizon: int
    mode: str = "autoregressive"  # autoregressive | single-shot

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.mode not in ("autoregressive", "single-shot"):
            raise ConfigError(f"unknown generation mode {self.mode!r}")


def generate(seq, decoder: FrozenDecoder, head: OutputHead, gen: GenerationConfig,
             value_embed: ValueEmbedding | None = None) -> Tensor:
    """Roll the decoder forward for H steps: (B, H, N) forecasts.

    Autoregressive mode maps the last hidden state to an N-vector each
    step and appends its value embedding as the next input token (the
    append is skipped after the final step). Single-shot mode reads the
    whole horizon off the final hidden state in one pass.
    """
    tokens = seq.tokens if hasattr(seq, "tokens") else seq
    if tokens.ndim == 2:
        tokens = tokens.reshape(1, *tokens.shape)
    b = tokens.shape[0]

    if gen.mode == "single-shot":
        if head.single_shot_horizon != gen.horizon:
            raise ShapeError(f"single-shot head built for horizon "
                             f"{head.single_shot_horizon}, asked for {gen.horizon}")
        last = decoder.decode(tokens)[:, -1, :]
        return project_output(last, head).reshape(b, gen.horizon, head.n_vars)

    if gen.horizon > 1 and value_embed is None:
        raise ConfigError("autoregressive generation beyond one step needs a value embedding")
    steps = []
    for h in range(gen.horizon):
        hidden = decoder.decode(tokens)
        values = project_output(hidden[:, -1, :], head)  # (B, N)
        steps.append(values.reshape(b, 1, head.n_vars))
        if h + 1 < gen.horizon:
            nxt = value_embed(values).reshape(b, 1, decoder.cfg.d_lm)
            tokens = T.concat([tokens, nxt], axis=1)
    return T.concat(steps, axis=1)
