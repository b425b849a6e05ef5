"""Seeded random number generation and parameter init draws.

Every random draw in the package goes through a generator built here so
that fixed-seed runs are bit-reproducible. The underlying algorithm is
PCG64 (O'Neill's permuted congruential generator, 128-bit state, 64-bit
output), which numpy documents and keeps stable across platforms.
"""

from __future__ import annotations

import math

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Return a fresh PCG64 generator for the given seed."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def uniform_fan_in(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init for linear weights."""
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def scaled_normal(rng: np.random.Generator, shape, scale: float = 0.02) -> np.ndarray:
    """Normal(0, scale) init for embedding-like tables."""
    return rng.normal(0.0, 1.0, size=shape) * scale
