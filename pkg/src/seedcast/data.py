"""CSV ingestion, chronological splits, z-score normalization, windowing.

All statistics are fit on the training split only; validation and test
rows are transformed with the training stats and never touch them.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

log = logging.getLogger("seedcast.data")

# conventional ETT boundaries (12/4/4 months) as row counts
_ETT_BOUNDS = {
    "ett_hourly": (8640, 11520, 14400),
    "ett_minutely": (34560, 46080, 57600),
}


@dataclass
class CsvSchema:
    """How to read a delimited file: which column is time, what to do with NaNs."""

    timestamp_column: str = "date"
    nan_policy: str = "reject"  # reject | drop-row

    def __post_init__(self):
        if self.nan_policy not in ("reject", "drop-row"):
            raise ConfigError(f"nan_policy must be 'reject' or 'drop-row', got {self.nan_policy!r}")


@dataclass
class RawSeries:
    timestamps: list
    values: np.ndarray  # (T_total, N) float64, finite
    variable_names: list[str]
    dropped_rows: int = 0

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]


@dataclass
class NormStats:
    mean: np.ndarray  # (N,)
    std: np.ndarray   # (N,), strictly positive


@dataclass
class WindowSample:
    x: np.ndarray  # (L, N) history
    y: np.ndarray  # (H, N) target, starting at origin_index + L
    origin_index: int


@dataclass
class SplitSpec:
    mode: str = "ratio"  # ratio | ett_hourly | ett_minutely
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)

    def __post_init__(self):
        if self.mode not in ("ratio", "ett_hourly", "ett_minutely"):
            raise ConfigError(f"unknown split mode {self.mode!r}")
        if self.mode == "ratio":
            r = self.ratios
            if len(r) != 3 or any(not (0.0 < x < 1.0) for x in r):
                raise ConfigError(f"split ratios must each lie in (0,1), got {r}")
            if abs(sum(r) - 1.0) > 1e-9:
                raise ConfigError(f"split ratios must sum to 1, got {sum(r)!r}")


def load_csv(path, schema: CsvSchema | None = None, min_rows: int | None = None) -> RawSeries:
    """Parse a headered CSV into a RawSeries.

    The timestamp column (schema.timestamp_column if present in the
    header, else the first column) carries time or a plain index; every
    other column must parse as a float. Rows with NaN/inf cells are
    rejected or dropped per schema.nan_policy.
    """
    schema = schema or CsvSchema()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n").rstrip("\r") for ln in fh]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty file")

    header = [h.strip() for h in lines[0].split(",")]
    if schema.timestamp_column in header:
        ts_col = header.index(schema.timestamp_column)
    else:
        ts_col = 0
    var_names = [h for i, h in enumerate(header) if i != ts_col]
    if not var_names:
        raise DataError(f"{path}: no value columns besides the timestamp")

    timestamps: list = []
    rows: list[list[float]] = []
    dropped = 0
    for lineno, ln in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in ln.split(",")]
        if len(cells) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(cells)}")
        vals = []
        bad_col: str | None = None
        for i, c in enumerate(cells):
            if i == ts_col:
                continue
            try:
                v = float(c)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: cannot parse {c!r} in column "
                                f"{header[i]!r} as a number") from exc
            if not np.isfinite(v):
                bad_col = header[i]
            vals.append(v)
        if bad_col is not None:
            if schema.nan_policy == "reject":
                raise DataError(f"{path}:{lineno}: non-finite value in column {bad_col!r} "
                                "(nan_policy=reject)")
            dropped += 1
            continue
        timestamps.append(cells[ts_col])
        rows.append(vals)

    if dropped:
        log.info("dropped %d row(s) with non-finite cells from %s", dropped, path)
    if not rows:
        raise DataError(f"{path}: no usable data rows")
    if min_rows is not None and len(rows) < min_rows:
        raise DataError(f"{path}: {len(rows)} rows after ingestion, need at least {min_rows}")

    values = np.asarray(rows, dtype=np.float64)
    _check_monotonic(timestamps, path)
    return RawSeries(timestamps=timestamps, values=values,
                     variable_names=var_names, dropped_rows=dropped)


def _check_monotonic(timestamps: list, path) -> None:
    try:
        keys = [float(t) for t in timestamps]
    except ValueError:
        keys = list(timestamps)  # ISO-style date strings sort lexicographically
    for i in range(1, len(keys)):
        if not keys[i] > keys[i - 1]:
            raise DataError(f"{path}: timestamps not strictly increasing at row {i + 1} "
                            f"({keys[i - 1]!r} then {keys[i]!r})")


def zscore_fit(train_rows: np.ndarray) -> NormStats:
    """Per-channel mean/std (population, ddof=0) from training rows only."""
    if train_rows.ndim != 2 or train_rows.shape[0] < 2:
        raise DataError(f"zscore_fit needs a (T>=2, N) matrix, got shape {train_rows.shape}")
    mean = train_rows.mean(axis=0)
    std = train_rows.std(axis=0)
    degenerate = std <= 0.0
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} constant channel(s); std clamped to 1",
                      RuntimeWarning, stacklevel=2)
        std = np.where(degenerate, 1.0, std)
    return NormStats(mean=mean, std=std)


def zscore_apply(rows: np.ndarray, stats: NormStats) -> np.ndarray:
    return (rows - stats.mean) / stats.std


def zscore_invert(rows: np.ndarray, stats: NormStats) -> np.ndarray:
    return rows * stats.std + stats.mean


def split(series: RawSeries, spec: SplitSpec) -> tuple[range, range, range]:
    """Chronological (train, val, test) row ranges: contiguous, disjoint, ordered."""
    t = series.n_rows
    if spec.mode in _ETT_BOUNDS:
        b1, b2, b3 = _ETT_BOUNDS[spec.mode]
        if t < b3:
            raise DataError(f"{spec.mode} split needs at least {b3} rows, got {t}")
        return range(0, b1), range(b1, b2), range(b2, b3)
    n_train = int(spec.ratios[0] * t)
    n_val = int(spec.ratios[1] * t)
    if n_train < 2 or n_val < 1 or t - n_train - n_val < 1:
        raise DataError(f"series of {t} rows too short for ratio split {spec.ratios}")
    return range(0, n_train), range(n_train, n_train + n_val), range(n_train + n_val, t)


def make_windows(rows: np.ndarray, L: int, H: int, stride: int = 1) -> list[WindowSample]:
    """Slide (L history, H target) windows over one split's rows.

    Yields ⌊(T − L − H)/stride⌋ + 1 samples when that is nonnegative,
    else none. Callers pass a single split, so windows cannot straddle
    split boundaries.
    """
    if L < 1 or H < 1 or stride < 1:
        raise ConfigError(f"window parameters must be positive: L={L}, H={H}, stride={stride}")
    t = rows.shape[0]
    out: list[WindowSample] = []
    for start in range(0, t - L - H + 1, stride):
        out.append(WindowSample(x=rows[start:start + L],
                                y=rows[start + L:start + L + H],
                                origin_index=start))
    return out
