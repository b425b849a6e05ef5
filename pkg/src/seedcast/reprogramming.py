"""Prototype reprogramming, text prompts, and sequence assembly.

Patch embeddings are rewritten as convex combinations of a small bank of
learnable prototype vectors so they land in a region of the embedding
space the frozen decoder can interpret. The full decoder input is

    [optional text-prompt embeddings][learned task prompt rows][patches]

where the text prompt is a deterministic, fixed-width rendering of
window statistics, tokenized at the byte level into the decoder's
frozen embedding table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .optim import Parameter
from .rng import scaled_normal
from .tensor import Tensor

TASK_IDS = ("forecast", "imputation", "anomaly")

_DEFAULT_TEMPLATE = Path(__file__).parent / "templates" / "default_prompt.txt"


class PrototypeBank:
    """K learnable anchor vectors in the decoder embedding space."""

    def __init__(self, k: int, d_lm: int, rng, prefix: str = "reprog"):
        if k < 1:
            raise ConfigError(f"prototype count must be >= 1, got {k}")
        self.k = k
        self.prototypes = Parameter(f"{prefix}.prototypes", scaled_normal(rng, (k, d_lm)))

    def parameters(self) -> list[Parameter]:
        return [self.prototypes]


def prototype_attention(z: Tensor, bank: PrototypeBank) -> Tensor:
    """Attention weights of patch embedding(s) over the prototype bank.

    z may be (d_LM,), (M, d_LM) or (B, M, d_LM); the result appends a
    K axis in place of d_LM. Rows are softmax-normalized scores
    z·p_k / sqrt(d_LM).
    """
    protos = bank.prototypes
    d_lm = protos.shape[1]
    if z.shape[-1] != d_lm:
        raise ShapeError(f"embedding dim {z.shape[-1]} does not match prototypes {d_lm}")
    flat = z.reshape(1, -1) if z.ndim == 1 else z
    logits = T.matmul(flat, T.transpose(protos, (1, 0))) * (1.0 / math.sqrt(d_lm))
    alpha = T.softmax(logits, axis=-1)
    return alpha.reshape(alpha.shape[-1]) if z.ndim == 1 else alpha


def reprogram(z: Tensor, bank: PrototypeBank) -> Tensor:
    """Convex prototype mixture: alpha(z) @ prototypes, same shape as z."""
    alpha = prototype_attention(z, bank)
    flat = alpha.reshape(1, -1) if alpha.ndim == 1 else alpha
    out = T.matmul(flat, bank.prototypes)
    return out.reshape(out.shape[-1]) if z.ndim == 1 else out


class TaskPromptBank:
    """Learned soft-prompt rows per task, created lazily per task id.

    Only prompts that are actually requested become parameters, so every
    registered parameter participates in the loss (the optimizer treats
    a trainable parameter without a gradient as a wiring error).
    """

    def __init__(self, prompt_len: int, d_lm: int, prefix: str = "reprog"):
        if prompt_len < 1:
            raise ConfigError(f"task prompt length must be >= 1, got {prompt_len}")
        self.prompt_len = prompt_len
        self.d_lm = d_lm
        self.prefix = prefix
        self._prompts: dict[str, Parameter] = {}

    def get(self, task: str, rng=None) -> Parameter:
        if task not in TASK_IDS:
            raise ConfigError(f"unknown task id {task!r}; expected one of {TASK_IDS}")
        prompt = self._prompts.get(task)
        if prompt is None:
            if rng is None:
                raise ConfigError(f"task prompt for {task!r} was never initialized")
            prompt = Parameter(f"{self.prefix}.task_prompt.{task}",
                               scaled_normal(rng, (self.prompt_len, self.d_lm)))
            self._prompts[task] = prompt
        return prompt

    def parameters(self) -> list[Parameter]:
        return [self._prompts[k] for k in sorted(self._prompts)]


# ---------------------------------------------------------------------------
# text prompts


@dataclass
class WindowStats:
    vmin: float
    vmax: float
    mean: float
    median: float
    trend: int          # sign of the least-squares slope of the channel mean
    top_lags: tuple[int, int, int]


@dataclass
class TextPromptSpec:
    domain_text: str
    instruction_text: str
    stats: WindowStats
    rendered: str = field(default="")


def autocorr_top_lags(series: np.ndarray, top: int = 3) -> tuple[int, ...]:
    """Strongest autocorrelation lags of a 1-D series, lags 1..L//2.

    r(l) = sum_t (s_t - mean)(s_{t+l} - mean) / sum_t (s_t - mean)^2,
    ranked descending with smaller lags breaking ties. Fewer candidate
    lags than requested are padded with 0.
    """
    s = np.asarray(series, dtype=np.float64)
    centered = s - s.mean()
    denom = float(np.dot(centered, centered))
    max_lag = s.size // 2
    lags = np.arange(1, max_lag + 1)
    if denom <= 0.0 or max_lag < 1:
        r = np.zeros(max_lag)
    else:
        r = np.array([np.dot(centered[:-lag], centered[lag:]) / denom for lag in lags])
    order = np.lexsort((lags, -r))
    best = [int(lags[i]) for i in order[:top]]
    while len(best) < top:
        best.append(0)
    return tuple(best)


def window_stats(x: np.ndarray) -> WindowStats:
    x = np.asarray(x, dtype=np.float64)
    s = x.mean(axis=1)  # channel-mean series
    if s.size < 2 or np.all(s == s[0]):
        slope = 0.0  # exact, immune to rounding in the mean subtraction
    else:
        tc = np.arange(s.size, dtype=np.float64)
        tc -= tc.mean()
        slope = float(np.dot(tc, s - s.mean()) / np.dot(tc, tc))
    return WindowStats(
        vmin=float(x.min()), vmax=float(x.max()),
        mean=float(x.mean()), median=float(np.median(x)),
        trend=int(np.sign(slope)),
        top_lags=autocorr_top_lags(s, top=3)[:3],
    )


def load_template(path: str | Path | None = None) -> str:
    template_path = Path(path) if path else _DEFAULT_TEMPLATE
    try:
        return template_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read prompt template {template_path}: {exc}") from exc


def build_text_prompt(x: np.ndarray, template: str, domain_text: str,
                      instruction_text: str) -> TextPromptSpec:
    """Render window statistics into the template, deterministically.

    Numeric fields use fixed-width formats so every window of a batch
    renders to the same byte length.
    """
    stats = window_stats(x)
    rendered = template.format(
        domain=domain_text,
        instruction=instruction_text,
        min=format(stats.vmin, "+10.4f"),
        max=format(stats.vmax, "+10.4f"),
        mean=format(stats.mean, "+10.4f"),
        median=format(stats.median, "+10.4f"),
        trend=format(stats.trend, "+2d"),
        lags=" ".join(format(lag, "3d") for lag in stats.top_lags),
    )
    return TextPromptSpec(domain_text, instruction_text, stats, rendered)


def embed_text(prompt: TextPromptSpec | str, byte_embedding: Tensor) -> Tensor:
    """Byte-level tokenization looked up in a (256, d_LM) embedding table."""
    rendered = prompt.rendered if isinstance(prompt, TextPromptSpec) else prompt
    ids = np.frombuffer(rendered.encode("utf-8"), dtype=np.uint8)
    if ids.size == 0:
        return Tensor(np.zeros((0, byte_embedding.shape[1])))
    return T.take_rows(byte_embedding, ids.astype(np.int64))


# ---------------------------------------------------------------------------
# sequence assembly


@dataclass
class SemanticSequence:
    tokens: Tensor                       # (B, L_text + L_task + M, d_LM)
    segment_marks: tuple[int, int, int]  # (text rows, task rows, patch rows)


def assemble_sequence(text_emb: Tensor | None, task_prompt: Tensor,
                      patches: Tensor) -> SemanticSequence:
    """Concatenate [text?][task prompt][patches] along the token axis.

    task_prompt is (L_task, d_LM) and is broadcast over the batch;
    patches are (B, M, d_LM); text_emb, when given, is (B, L_text, d_LM).
    """
    if patches.ndim == 2:
        patches = patches.reshape(1, *patches.shape)
    b, m, d_lm = patches.shape
    if task_prompt.shape[-1] != d_lm or (text_emb is not None and text_emb.shape[-1] != d_lm):
        raise ShapeError("sequence segments disagree on embedding dim")
    task = T.expand_batch(task_prompt, b)
    parts = [task, patches]
    n_text = 0
    if text_emb is not None:
        if text_emb.ndim == 2:
            text_emb = T.expand_batch(text_emb, b)
        n_text = text_emb.shape[1]
        parts.insert(0, text_emb)
    tokens = T.concat(parts, axis=1)
    return SemanticSequence(tokens, (n_text, task_prompt.shape[0], m))
