"""Feature-map reshape, non-overlapping patch cutting, patch projection.

The (N, D, L) structural feature map is rearranged to a unified temporal
layout E ∈ (L, N·D) (variable-major, channel-minor at each time step),
cut into M = ⌊L/P⌋ patches of P consecutive steps (tail rows beyond M·P
are dropped), and each patch is flattened time-major and projected into
the decoder embedding space, where a learned positional row is added.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .optim import Parameter
from .rng import scaled_normal, uniform_fan_in
from .tensor import Tensor


@dataclass
class PatchConfig:
    patch_len: int    # P, time steps per patch
    d_lm: int         # decoder embedding dim
    max_patches: int  # positional table capacity

    def __post_init__(self):
        if min(self.patch_len, self.d_lm, self.max_patches) < 1:
            raise ConfigError(f"patch extents must be positive: {self}")


def patch_count(window: int, patch_len: int) -> int:
    return window // patch_len


def reshape_features(feats: Tensor) -> Tensor:
    """(..., N, D, L) -> (..., L, N·D); a pure permutation of the data.

    E[t] concatenates, variable by variable, the D feature channels at
    time t.
    """
    if feats.ndim == 3:
        n, d, ln = feats.shape
        return T.transpose(feats, (2, 0, 1)).reshape(ln, n * d)
    b, n, d, ln = feats.shape
    return T.transpose(feats, (0, 3, 1, 2)).reshape(b, ln, n * d)


def unshape_features(e: Tensor, n_vars: int, channels: int) -> Tensor:
    """Inverse of reshape_features: (..., L, N·D) -> (..., N, D, L)."""
    if e.ndim == 2:
        ln = e.shape[0]
        return T.transpose(e.reshape(ln, n_vars, channels), (1, 2, 0))
    b, ln = e.shape[0], e.shape[1]
    return T.transpose(e.reshape(b, ln, n_vars, channels), (0, 2, 3, 1))


def segment_patches(e: Tensor, patch_len: int) -> Tensor:
    """(..., L, C) -> (..., M, P·C) flattened patches, M = ⌊L/P⌋.

    Each patch's P rows are flattened row-major, i.e. time-major with
    the channel layout of reshape_features inside each step. Trailing
    L mod P rows are discarded.
    """
    ln, c = e.shape[-2], e.shape[-1]
    if ln < patch_len:
        raise ShapeError(f"window of {ln} steps shorter than patch length {patch_len}")
    m = ln // patch_len
    lead = e.shape[:-2]
    idx = (slice(None),) * len(lead) + (slice(0, m * patch_len),)
    return e[idx].reshape(*lead, m, patch_len * c)


def project_patch(patch: Tensor, w_p: Tensor, b_p: Tensor) -> Tensor:
    """Flattened patch(es) (..., P·C) -> embedding(s) (..., d_LM)."""
    if patch.shape[-1] != w_p.shape[-1]:
        raise ShapeError(f"patch width {patch.shape[-1]} does not match "
                         f"projection input {w_p.shape[-1]}")
    flat = patch.reshape(1, -1) if patch.ndim == 1 else patch
    out = T.linear(flat, w_p, b_p)
    return out.reshape(out.shape[-1]) if patch.ndim == 1 else out


def add_positional(z: Tensor, index: int, table: Tensor) -> Tensor:
    """z_i + table[index] for a single patch embedding."""
    if index >= table.shape[0]:
        raise ShapeError(f"patch index {index} exceeds positional capacity {table.shape[0]}")
    return z + table[index]


class PatchProjector:
    """Learned patch projection plus positional table, batch-aware."""

    def __init__(self, cfg: PatchConfig, n_vars: int, channels: int, rng,
                 prefix: str = "patching"):
        self.cfg = cfg
        width = cfg.patch_len * n_vars * channels
        self.w_p = Parameter(f"{prefix}.project.w", uniform_fan_in(rng, (cfg.d_lm, width), width))
        self.b_p = Parameter(f"{prefix}.project.b", np.zeros(cfg.d_lm))
        self.pos = Parameter(f"{prefix}.positional", scaled_normal(rng, (cfg.max_patches, cfg.d_lm)))

    def parameters(self) -> list[Parameter]:
        return [self.w_p, self.b_p, self.pos]

    def __call__(self, feats: Tensor) -> Tensor:
        """Feature map (B, N, D, L) -> positioned patch tokens (B, M, d_LM)."""
        e = reshape_features(feats)
        patches = segment_patches(e, self.cfg.patch_len)
        m = patches.shape[-2]
        if m > self.cfg.max_patches:
            raise ShapeError(f"{m} patches exceed positional capacity {self.cfg.max_patches}")
        z = project_patch(patches, self.w_p, self.b_p)
        return z + self.pos[0:m]
