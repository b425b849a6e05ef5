"""Experiment orchestration: train / evaluate / forecast / ablate.

Checkpoints are self-contained: besides the model parameters they carry
the resolved config text, the normalization statistics, and the dataset
column names as frozen pseudo-parameters, so evaluate and forecast need
only the checkpoint plus data.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, pack_text, save_checkpoint, unpack_text
from .config import ExperimentConfig, parse_config
from .data import (CsvSchema, NormStats, RawSeries, SplitSpec, WindowSample,
                   load_csv, make_windows, split, zscore_apply, zscore_fit,
                   zscore_invert)
from .decoder import freeze_check
from .errors import ConfigError, DataError, NumericError
from .model import VARIANTS, SeedModel
from .optim import Adam, Parameter
from .rng import make_rng
from .tensor import backward, no_grad

log = logging.getLogger("seedcast.pipeline")


@dataclass
class Metrics:
    mse: float
    mae: float
    n_samples: int


@dataclass
class TrainState:
    epoch: int = 0
    best_val_loss: float = float("inf")
    epochs_since_improvement: int = 0
    best_snapshot: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class Dataset:
    train: list[WindowSample]
    val: list[WindowSample]
    test: list[WindowSample]
    stats: NormStats
    raw: RawSeries

    def windows(self, name: str) -> list[WindowSample]:
        try:
            return {"train": self.train, "val": self.val, "test": self.test}[name]
        except KeyError:
            raise ConfigError(f"unknown split {name!r}; expected train, val or test") from None


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    """Load, split, normalize (train stats only), and window a CSV."""
    if not cfg.dataset_path:
        raise ConfigError("dataset.path is not set")
    schema = CsvSchema(timestamp_column=cfg.timestamp_column, nan_policy=cfg.nan_policy)
    raw = load_csv(cfg.dataset_path, schema, min_rows=cfg.window + cfg.horizon)
    spec = SplitSpec(mode=cfg.split_mode,
                     ratios=(cfg.split_train, cfg.split_val, cfg.split_test))
    r_train, r_val, r_test = split(raw, spec)
    stats = zscore_fit(raw.values[r_train.start:r_train.stop])
    parts = []
    for r in (r_train, r_val, r_test):
        normed = zscore_apply(raw.values[r.start:r.stop], stats)
        parts.append(make_windows(normed, cfg.window, cfg.horizon, cfg.stride))
    return Dataset(train=parts[0], val=parts[1], test=parts[2], stats=stats, raw=raw)


def _stack(windows: list[WindowSample]) -> tuple[np.ndarray, np.ndarray]:
    xs = np.stack([w.x for w in windows])
    ys = np.stack([w.y for w in windows])
    return xs, ys


def _batched_sse_sae(model: SeedModel, windows: list[WindowSample],
                     batch_size: int) -> tuple[float, float, int]:
    """Exact error sums over every forecast scalar of the given windows."""
    sse = 0.0
    sae = 0.0
    count = 0
    with no_grad():
        for lo in range(0, len(windows), batch_size):
            xs, ys = _stack(windows[lo:lo + batch_size])
            pred = model.forward(xs).data
            err = pred - ys
            sse += float((err * err).sum())
            sae += float(np.abs(err).sum())
            count += err.size
    return sse, sae, count


def evaluate_model(model: SeedModel, windows: list[WindowSample],
                   batch_size: int) -> Metrics:
    if not windows:
        raise DataError("split produced no evaluation windows")
    sse, sae, count = _batched_sse_sae(model, windows, batch_size)
    return Metrics(mse=sse / count, mae=sae / count, n_samples=len(windows))


def naive_baseline(windows: list[WindowSample]) -> Metrics:
    """Repeat each window's last observed row across the horizon."""
    if not windows:
        raise DataError("no windows for the naive baseline")
    sse = 0.0
    sae = 0.0
    count = 0
    for w in windows:
        err = w.y - w.x[-1]
        sse += float((err * err).sum())
        sae += float(np.abs(err).sum())
        count += err.size
    return Metrics(mse=sse / count, mae=sae / count, n_samples=len(windows))


def train(cfg: ExperimentConfig, variant: str = "full",
          checkpoint_path: str | Path | None = None,
          ) -> tuple[Path, list[dict], SeedModel, Dataset]:
    """Fit a model with Adam + early stopping; write a self-contained checkpoint.

    Returns (checkpoint path, per-epoch log, trained model, dataset).
    Aborts with NumericError if the loss ever goes non-finite; raises if
    the frozen decoder moved (it cannot, but the digest proves it).
    """
    cfg.validate()
    data = build_dataset(cfg)
    if not data.train or not data.val:
        raise DataError(f"dataset {cfg.dataset_path!r} yields "
                        f"{len(data.train)} train / {len(data.val)} val windows; "
                        "both splits must be non-empty")
    model = SeedModel(cfg, data.raw.n_vars, variant=variant)
    decoder_digest = model.decoder.digest()
    trainables = model.trainable_parameters()
    opt = Adam(trainables, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    shuffle_rng = make_rng(cfg.seed)

    state = TrainState(best_snapshot=model.snapshot())
    history: list[dict] = []
    t0 = time.perf_counter()
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(len(data.train))
        epoch_loss = 0.0  # window-weighted so the figure is shuffle-invariant
        n_batches = 0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [data.train[i] for i in order[lo:lo + cfg.batch_size]]
            xs, ys = _stack(batch)
            opt.zero_grad()
            loss = model.loss(xs, ys)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericError(f"training loss became non-finite ({value!r}) "
                                   f"at epoch {epoch}, batch {n_batches + 1}")
            backward(loss)
            opt.step()
            epoch_loss += value * len(batch)
            n_batches += 1

        sse, _, count = _batched_sse_sae(model, data.val, cfg.batch_size)
        val_loss = sse / count
        state.epoch = epoch
        improved = val_loss < state.best_val_loss
        if improved:
            state.best_val_loss = val_loss
            state.epochs_since_improvement = 0
            state.best_snapshot = model.snapshot()
        else:
            state.epochs_since_improvement += 1
        history.append({"epoch": epoch, "train_loss": epoch_loss / len(data.train),
                        "val_loss": val_loss, "improved": improved})
        log.info("epoch %d: train %.6f, val %.6f%s", epoch, history[-1]["train_loss"],
                 val_loss, "" if improved else f" (stall {state.epochs_since_improvement})")
        if state.epochs_since_improvement >= cfg.patience:
            log.info("early stop after epoch %d", epoch)
            break

    model.restore(state.best_snapshot)
    elapsed = time.perf_counter() - t0
    if not freeze_check(model.decoder, decoder_digest):
        raise NumericError("frozen decoder parameters changed during training")

    path = Path(checkpoint_path if checkpoint_path is not None else cfg.checkpoint_path)
    save_model(path, model, data.stats, data.raw.variable_names, variant)
    history.append({"epoch": state.epoch, "train_loss": float("nan"),
                    "val_loss": state.best_val_loss, "improved": False,
                    "final": True, "train_time_s": elapsed})
    return path, history, model, data


def save_model(path: Path, model: SeedModel, stats: NormStats,
               columns: list[str], variant: str) -> None:
    params = list(model.parameters())
    params.append(pack_text("meta.config_utf8", model.cfg.to_text()))
    params.append(pack_text("meta.variant_utf8", variant))
    params.append(pack_text("meta.columns_utf8", ",".join(columns)))
    params.append(Parameter("norm.mean", stats.mean, frozen=True))
    params.append(Parameter("norm.std", stats.std, frozen=True))
    save_checkpoint(path, params)


@dataclass
class LoadedModel:
    model: SeedModel
    cfg: ExperimentConfig
    stats: NormStats
    columns: list[str]
    variant: str


def load_model(path: str | Path) -> LoadedModel:
    params = {p.name: p for p in load_checkpoint(path)}
    for required in ("meta.config_utf8", "meta.variant_utf8", "meta.columns_utf8",
                     "norm.mean", "norm.std"):
        if required not in params:
            raise DataError(f"{path}: checkpoint lacks {required!r}")
    cfg = parse_config(unpack_text(params["meta.config_utf8"]), source=f"{path}#config")
    cfg.validate()
    variant = unpack_text(params["meta.variant_utf8"])
    columns = unpack_text(params["meta.columns_utf8"]).split(",")
    stats = NormStats(mean=params["norm.mean"].data.copy(),
                      std=params["norm.std"].data.copy())
    model = SeedModel(cfg, len(columns), variant=variant)
    model.load_state({name: p.data for name, p in params.items()})
    return LoadedModel(model=model, cfg=cfg, stats=stats, columns=columns, variant=variant)


def evaluate(checkpoint: str | Path, split_name: str = "test") -> Metrics:
    """Metrics of a stored model over a stored dataset split."""
    if split_name not in ("val", "test"):
        raise ConfigError(f"evaluate split must be val or test, got {split_name!r}")
    loaded = load_model(checkpoint)
    data = build_dataset(loaded.cfg)
    windows = data.windows(split_name)
    if not windows:
        raise DataError(f"split {split_name!r} has no windows")
    return evaluate_model(loaded.model, windows, loaded.cfg.batch_size)


def forecast(checkpoint: str | Path, input_csv: str | Path,
             out_csv: str | Path) -> np.ndarray:
    """Forecast H denormalized steps from the last L rows of input_csv."""
    loaded = load_model(checkpoint)
    cfg = loaded.cfg
    schema = CsvSchema(timestamp_column=cfg.timestamp_column, nan_policy=cfg.nan_policy)
    raw = load_csv(input_csv, schema, min_rows=cfg.window)
    if raw.variable_names != loaded.columns:
        raise DataError(f"{input_csv}: columns {raw.variable_names} do not match "
                        f"the checkpoint's {loaded.columns}")
    window = raw.values[-cfg.window:]
    normed = zscore_apply(window, loaded.stats)
    with no_grad():
        pred = loaded.model.forward(normed[None, :, :]).data[0]
    values = zscore_invert(pred, loaded.stats)

    lines = ["step," + ",".join(loaded.columns)]
    for i, row in enumerate(values, start=1):
        lines.append(str(i) + "," + ",".join(format(v, ".10g") for v in row))
    Path(out_csv).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return values


@dataclass
class ReportRow:
    dataset: str
    variant: str
    mse: float
    mae: float
    train_time_s: float
    params_trainable: int
    params_frozen: int


def run_ablation(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                 split_name: str = "val") -> list[ReportRow]:
    """Train every variant under one config/seed and collect metrics rows."""
    rows = []
    out_dir = Path(out_dir if out_dir is not None else cfg.report_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for variant in VARIANTS:
        t0 = time.perf_counter()
        ckpt, _, model, data = train(cfg, variant=variant,
                                     checkpoint_path=out_dir / f"{variant}.ckpt")
        elapsed = time.perf_counter() - t0
        metrics = evaluate_model(model, data.windows(split_name), cfg.batch_size)
        trainable = sum(p.size for p in model.trainable_parameters())
        frozen = sum(p.size for p in model.parameters() if p.frozen)
        rows.append(ReportRow(dataset=cfg.label(), variant=variant,
                              mse=metrics.mse, mae=metrics.mae, train_time_s=elapsed,
                              params_trainable=trainable, params_frozen=frozen))
        log.info("variant %s: val mse %.6f, mae %.6f", variant, metrics.mse, metrics.mae)
    return rows
