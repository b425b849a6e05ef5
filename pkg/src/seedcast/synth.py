"""Seeded synthetic multivariate series: sinusoids + mild trend + noise.

Ships in-repo so the end-to-end tests and the learning acceptance check
never depend on downloaded benchmarks.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigError
from .rng import make_rng

_PERIODS = np.array([16.0, 24.0, 32.0, 48.0, 64.0])


def generate_series(rows: int, n_vars: int, seed: int) -> tuple[np.ndarray, list[str]]:
    """Return (values (rows, n_vars), variable names).

    Each channel is a base sinusoid with a random period, amplitude and
    phase, a weaker second harmonic, a small linear trend, and Gaussian
    noise. Fully determined by the seed.
    """
    if rows < 2 or n_vars < 1:
        raise ConfigError(f"need rows >= 2 and vars >= 1, got rows={rows}, vars={n_vars}")
    rng = make_rng(seed)
    t = np.arange(rows, dtype=np.float64)
    cols = []
    for _ in range(n_vars):
        period = float(rng.choice(_PERIODS))
        amp = rng.uniform(0.7, 1.3)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        phase2 = rng.uniform(0.0, 2.0 * np.pi)
        slope = rng.uniform(-2.5e-4, 2.5e-4)
        noise = 0.05 * rng.standard_normal(rows)
        x = (amp * np.sin(2.0 * np.pi * t / period + phase)
             + 0.3 * amp * np.sin(4.0 * np.pi * t / period + phase2)
             + slope * t + noise)
        cols.append(x)
    values = np.stack(cols, axis=1)
    names = [f"v{i + 1}" for i in range(n_vars)]
    return values, names


def write_csv(path: str | Path, values: np.ndarray, names: list[str]) -> None:
    """Write a headered CSV with an integer index in the 'date' column."""
    lines = ["date," + ",".join(names)]
    for i, row in enumerate(values):
        lines.append(str(i) + "," + ",".join(format(v, ".10g") for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
