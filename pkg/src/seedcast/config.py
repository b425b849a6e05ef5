"""Experiment configuration: `key = value` files with dotted keys.

Blank lines and lines starting with '#' are ignored. Unknown keys are
errors, as are type mismatches. Validation collects every violated
cross-module consistency rule and reports them all at once.

A config round-trips through to_text/from_text so the exact resolved
settings can be embedded in a checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

# key -> (attribute, type, default)
_SCHEMA: dict[str, tuple[str, type, object]] = {
    "seed": ("seed", int, 42),
    "dataset.path": ("dataset_path", str, ""),
    "dataset.name": ("dataset_name", str, ""),
    "dataset.timestamp_column": ("timestamp_column", str, "date"),
    "dataset.nan_policy": ("nan_policy", str, "reject"),
    "split.mode": ("split_mode", str, "ratio"),
    "split.train": ("split_train", float, 0.7),
    "split.val": ("split_val", float, 0.1),
    "split.test": ("split_test", float, 0.2),
    "window.length": ("window", int, 96),
    "window.horizon": ("horizon", int, 96),
    "window.stride": ("stride", int, 1),
    "encoder.d": ("encoder_d", int, 32),
    "encoder.layers": ("encoder_layers", int, 2),
    "encoder.heads": ("encoder_heads", int, 4),
    "encoder.ffn": ("encoder_ffn", int, 64),
    "encoder.channels": ("channels", int, 4),
    "patch.length": ("patch_len", int, 16),
    "patch.d_lm": ("d_lm", int, 64),
    "patch.max_patches": ("max_patches", int, 0),  # 0 = exactly ⌊L/P⌋
    "reprog.prototypes": ("prototypes", int, 8),
    "reprog.task_prompt_len": ("task_prompt_len", int, 4),
    "reprog.task": ("task", str, "forecast"),
    "reprog.text_prompt": ("text_prompt", bool, False),
    "reprog.template_path": ("template_path", str, ""),
    "reprog.domain_text": ("domain_text", str, "multivariate series"),
    "reprog.instruction_text": ("instruction_text", str, "continue the sequence"),
    "decoder.layers": ("decoder_layers", int, 2),
    "decoder.heads": ("decoder_heads", int, 4),
    "decoder.ffn": ("decoder_ffn", int, 0),  # 0 = 4 x d_lm
    "decoder.init_seed": ("decoder_init_seed", int, 1234),
    "generate.mode": ("generate_mode", str, "autoregressive"),
    "optim.lr": ("lr", float, 1e-3),
    "optim.beta1": ("beta1", float, 0.9),
    "optim.beta2": ("beta2", float, 0.999),
    "optim.eps": ("eps", float, 1e-8),
    "optim.batch_size": ("batch_size", int, 32),
    "optim.max_epochs": ("max_epochs", int, 50),
    "optim.patience": ("patience", int, 5),
    "out.checkpoint": ("checkpoint_path", str, "model.ckpt"),
    "out.report_dir": ("report_dir", str, "reports"),
}

_ATTR_TO_KEY = {attr: key for key, (attr, _, _) in _SCHEMA.items()}


@dataclass
class ExperimentConfig:
    seed: int = 42
    dataset_path: str = ""
    dataset_name: str = ""
    timestamp_column: str = "date"
    nan_policy: str = "reject"
    split_mode: str = "ratio"
    split_train: float = 0.7
    split_val: float = 0.1
    split_test: float = 0.2
    window: int = 96
    horizon: int = 96
    stride: int = 1
    encoder_d: int = 32
    encoder_layers: int = 2
    encoder_heads: int = 4
    encoder_ffn: int = 64
    channels: int = 4
    patch_len: int = 16
    d_lm: int = 64
    max_patches: int = 0
    prototypes: int = 8
    task_prompt_len: int = 4
    task: str = "forecast"
    text_prompt: bool = False
    template_path: str = ""
    domain_text: str = "multivariate series"
    instruction_text: str = "continue the sequence"
    decoder_layers: int = 2
    decoder_heads: int = 4
    decoder_ffn: int = 0
    decoder_init_seed: int = 1234
    generate_mode: str = "autoregressive"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5
    checkpoint_path: str = "model.ckpt"
    report_dir: str = "reports"

    # -- derived -----------------------------------------------------------
    @property
    def n_patches(self) -> int:
        return self.window // self.patch_len

    def effective_max_patches(self) -> int:
        return self.max_patches if self.max_patches > 0 else self.n_patches

    def effective_decoder_ffn(self) -> int:
        return self.decoder_ffn if self.decoder_ffn > 0 else 4 * self.d_lm

    def label(self) -> str:
        if self.dataset_name:
            return self.dataset_name
        return Path(self.dataset_path).stem if self.dataset_path else "dataset"

    # -- validation ----------------------------------------------------------
    def validate(self) -> None:
        """Raise ConfigError listing every violated consistency rule."""
        bad: list[str] = []
        positive = ["window", "horizon", "stride", "encoder_d", "encoder_heads",
                    "encoder_ffn", "channels", "patch_len", "d_lm", "prototypes",
                    "task_prompt_len", "decoder_layers", "decoder_heads",
                    "decoder_init_seed", "batch_size", "max_epochs", "patience"]
        for attr in positive:
            if getattr(self, attr) < 1:
                bad.append(f"{_ATTR_TO_KEY[attr]} must be >= 1, got {getattr(self, attr)}")
        if self.encoder_layers < 0:
            bad.append(f"encoder.layers must be >= 0, got {self.encoder_layers}")
        if self.seed < 0:
            bad.append(f"seed must be >= 0, got {self.seed}")
        if self.encoder_d % self.encoder_heads != 0:
            bad.append(f"encoder.d ({self.encoder_d}) not divisible by "
                       f"encoder.heads ({self.encoder_heads})")
        if self.d_lm % self.decoder_heads != 0:
            bad.append(f"patch.d_lm ({self.d_lm}) not divisible by "
                       f"decoder.heads ({self.decoder_heads})")
        if self.window < self.patch_len:
            bad.append(f"window.length ({self.window}) shorter than "
                       f"patch.length ({self.patch_len})")
        elif self.max_patches > 0 and self.max_patches < self.n_patches:
            bad.append(f"patch.max_patches ({self.max_patches}) below the "
                       f"{self.n_patches} patches a window produces")
        if self.nan_policy not in ("reject", "drop-row"):
            bad.append(f"dataset.nan_policy must be reject or drop-row, got {self.nan_policy!r}")
        if self.split_mode not in ("ratio", "ett_hourly", "ett_minutely"):
            bad.append(f"split.mode {self.split_mode!r} unknown")
        elif self.split_mode == "ratio":
            r = (self.split_train, self.split_val, self.split_test)
            if any(not (0.0 < x < 1.0) for x in r):
                bad.append(f"split ratios must each lie in (0,1), got {r}")
            elif abs(sum(r) - 1.0) > 1e-9:
                bad.append(f"split ratios must sum to 1, got {sum(r)!r}")
        if self.task not in ("forecast", "imputation", "anomaly"):
            bad.append(f"reprog.task {self.task!r} unknown")
        if self.generate_mode not in ("autoregressive", "single-shot"):
            bad.append(f"generate.mode {self.generate_mode!r} unknown")
        if self.lr < 0.0:  # lr = 0 is a legal no-op (fixed-point sanity checks)
            bad.append(f"optim.lr must be >= 0, got {self.lr}")
        if self.eps <= 0.0:
            bad.append(f"optim.eps must be > 0, got {self.eps}")
        for attr in ("beta1", "beta2"):
            if not (0.0 <= getattr(self, attr) < 1.0):
                bad.append(f"{_ATTR_TO_KEY[attr]} must lie in [0,1), got {getattr(self, attr)}")
        if bad:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(bad))

    # -- serialization -----------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for key, (attr, typ, _) in _SCHEMA.items():
            val = getattr(self, attr)
            if typ is bool:
                val = "true" if val else "false"
            elif typ is float:
                val = repr(float(val))
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"


def _parse_value(key: str, raw: str, typ: type):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError
            return low == "true"
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {typ.__name__}") from None


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    cfg = ExperimentConfig()
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        attr, typ, _ = _SCHEMA[key]
        setattr(cfg, attr, _parse_value(key, raw, typ))
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text, source=str(path))
    cfg.validate()
    return cfg
