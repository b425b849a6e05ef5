"""Command-line interface.

Exit codes: 0 success; 1 usage or configuration error; 2 data error;
3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline, report, synth
from .config import load_config
from .errors import ConfigError, DataError, NumericError, ShapeError
from .gradcheck import MODULES, run_gradcheck

GRADCHECK_TOLERANCE = 1e-4


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="seedcast",
                     description="Multivariate forecasting through a frozen decoder")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model and write a checkpoint")
    p.add_argument("--config", required=True, help="experiment config file")

    p = sub.add_parser("evaluate", help="score a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=("val", "test"))

    p = sub.add_parser("forecast", help="forecast from the last window of a CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="CSV with at least one full window")
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("ablate", help="train and compare all model variants")
    p.add_argument("--config", required=True)

    p = sub.add_parser("gradcheck", help="verify gradients against finite differences")
    p.add_argument("--module", choices=MODULES, default=None)

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--rows", type=int, default=2000)
    p.add_argument("--vars", type=int, default=3)
    p.add_argument("--seed", type=int, default=42)
    return parser


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    ckpt, history, _, _ = pipeline.train(cfg)
    for entry in history:
        if entry.get("final"):
            print(f"best val mse {entry['val_loss']:.6f} "
                  f"({entry['train_time_s']:.1f}s); checkpoint: {ckpt}")
        else:
            print(f"epoch {entry['epoch']:3d}  train {entry['train_loss']:.6f}  "
                  f"val {entry['val_loss']:.6f}")
    out_dir = Path(cfg.report_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.render_history_figure(history, out_dir / "train_curve.png")
    return 0


def _cmd_evaluate(args) -> int:
    metrics = pipeline.evaluate(args.checkpoint, args.split)
    print(f"split={args.split} mse={metrics.mse:.6f} mae={metrics.mae:.6f} "
          f"windows={metrics.n_samples}")
    return 0


def _cmd_forecast(args) -> int:
    values = pipeline.forecast(args.checkpoint, args.input, args.out)
    print(f"wrote {values.shape[0]} steps x {values.shape[1]} variables to {args.out}")
    return 0


def _cmd_ablate(args) -> int:
    cfg = load_config(args.config)
    rows = pipeline.run_ablation(cfg)
    paths = report.emit_report(rows, cfg.report_dir, basename="ablation")
    print(report.render_table(rows), end="")
    print(f"report: {paths['csv']}, {paths['txt']}, {paths['png']}")
    return 0


def _cmd_gradcheck(args) -> int:
    results = run_gradcheck(args.module)
    failed = False
    for name, err in results.items():
        ok = err < GRADCHECK_TOLERANCE
        failed |= not ok
        print(f"{name:16s} max rel err {err:.3e}  {'ok' if ok else 'FAIL'}")
    if failed:
        raise NumericError("gradient check exceeded tolerance")
    return 0


def _cmd_synth(args) -> int:
    values, names = synth.generate_series(args.rows, args.vars, args.seed)
    synth.write_csv(args.out, values, names)
    print(f"wrote {args.rows} rows x {args.vars} variables to {args.out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "forecast": _cmd_forecast,
    "ablate": _cmd_ablate,
    "gradcheck": _cmd_gradcheck,
    "synth": _cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, ShapeError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
