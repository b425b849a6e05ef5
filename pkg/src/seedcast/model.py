"""End-to-end model: encoder -> patches -> reprogramming -> frozen decoder.

Variants (for the ablation harness):
  full          everything on
  no_reprogram  prototype mixing bypassed (patch tokens go in unchanged)
  no_encoder    zero attention layers: project + unfold only
  single_shot   whole horizon read from one decoder pass instead of
                autoregressive generation

Each variant only instantiates the parameters it uses, so every
trainable parameter is guaranteed to sit on the gradient path.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .config import ExperimentConfig
from .decoder import (DecoderConfig, FrozenDecoder, GenerationConfig, OutputHead,
                      ValueEmbedding, generate)
from .encoder import EncoderConfig, StructuralEncoder
from .errors import ConfigError, ShapeError
from .optim import Parameter
from .patching import PatchConfig, PatchProjector
from .reprogramming import (PrototypeBank, TaskPromptBank, assemble_sequence,
                            build_text_prompt, embed_text, load_template, reprogram)
from .rng import make_rng
from .tensor import Tensor

VARIANTS = ("full", "no_reprogram", "no_encoder", "single_shot")


class SeedModel:
    def __init__(self, cfg: ExperimentConfig, n_vars: int, variant: str = "full"):
        if variant not in VARIANTS:
            raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
        cfg.validate()
        self.cfg = cfg
        self.n_vars = n_vars
        self.variant = variant

        rng = make_rng(cfg.seed)
        enc_layers = 0 if variant == "no_encoder" else cfg.encoder_layers
        self.encoder = StructuralEncoder(
            EncoderConfig(n_vars=n_vars, window=cfg.window, d=cfg.encoder_d,
                          num_layers=enc_layers, num_heads=cfg.encoder_heads,
                          ffn_dim=cfg.encoder_ffn, channels=cfg.channels), rng)
        self.patcher = PatchProjector(
            PatchConfig(patch_len=cfg.patch_len, d_lm=cfg.d_lm,
                        max_patches=cfg.effective_max_patches()),
            n_vars, cfg.channels, rng)
        self.prototypes = (None if variant == "no_reprogram"
                           else PrototypeBank(cfg.prototypes, cfg.d_lm, rng))
        self.task_prompts = TaskPromptBank(cfg.task_prompt_len, cfg.d_lm)
        self.task_prompts.get(cfg.task, rng)

        single_shot = variant == "single_shot"
        self.gen = GenerationConfig(horizon=cfg.horizon,
                                    mode="single-shot" if single_shot
                                    else cfg.generate_mode)
        if self.gen.mode == "single-shot":
            self.head = OutputHead(n_vars, cfg.d_lm, rng, horizon=cfg.horizon)
            self.value_embed = None
        else:
            self.head = OutputHead(n_vars, cfg.d_lm, rng)
            self.value_embed = (ValueEmbedding(n_vars, cfg.d_lm, rng)
                                if cfg.horizon > 1 else None)

        self.decoder = FrozenDecoder(
            DecoderConfig(d_lm=cfg.d_lm, num_layers=cfg.decoder_layers,
                          num_heads=cfg.decoder_heads,
                          ffn_dim=cfg.effective_decoder_ffn(),
                          init_seed=cfg.decoder_init_seed))
        self._template = load_template(cfg.template_path or None) if cfg.text_prompt else None

    # -- parameter plumbing --------------------------------------------------
    def parameters(self) -> list[Parameter]:
        out = list(self.encoder.parameters())
        out += self.patcher.parameters()
        if self.prototypes is not None:
            out += self.prototypes.parameters()
        out += self.task_prompts.parameters()
        out += self.head.parameters()
        if self.value_embed is not None:
            out += self.value_embed.parameters()
        out += self.decoder.parameters()
        names = [p.name for p in out]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate parameter names in model")
        return out

    def trainable_parameters(self) -> list[Parameter]:
        return [p for p in self.parameters() if not p.frozen]

    def snapshot(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.trainable_parameters()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for p in self.trainable_parameters():
            p.data = snap[p.name].copy()

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        """Overwrite every parameter from a name -> array mapping."""
        mine = {p.name: p for p in self.parameters()}
        missing = sorted(set(mine) - set(arrays))
        if missing:
            raise ShapeError(f"checkpoint lacks parameters: {', '.join(missing)}")
        for name, p in mine.items():
            arr = arrays[name]
            if arr.shape != p.data.shape:
                raise ShapeError(f"parameter {name!r}: checkpoint shape {arr.shape} "
                                 f"!= model shape {p.data.shape}")
            p.data = np.ascontiguousarray(arr, dtype=np.float64)

    # -- forward -------------------------------------------------------------
    def _text_embeddings(self, xb: np.ndarray) -> Tensor | None:
        if self._template is None:
            return None
        rows = []
        for x in xb:
            prompt = build_text_prompt(x, self._template, self.cfg.domain_text,
                                       self.cfg.instruction_text)
            rows.append(embed_text(prompt, self.decoder.byte_embedding))
        lengths = {r.shape[0] for r in rows}
        if len(lengths) != 1:
            raise ShapeError(f"text prompts rendered to unequal lengths {sorted(lengths)}")
        return T.concat([r.reshape(1, *r.shape) for r in rows], axis=0)

    def forward(self, xb) -> Tensor:
        """Normalized windows (B, L, N) -> normalized forecasts (B, H, N)."""
        if not isinstance(xb, Tensor):
            xb = Tensor(xb)
        if xb.ndim == 2:
            xb = xb.reshape(1, *xb.shape)
        feats = self.encoder.encode(xb)          # (B, N, D, L)
        z = self.patcher(feats)                  # (B, M, d_LM)
        if self.prototypes is not None:
            z = reprogram(z, self.prototypes)
        task_prompt = self.task_prompts.get(self.cfg.task, None)
        seq = assemble_sequence(self._text_embeddings(xb.data), task_prompt, z)
        return generate(seq, self.decoder, self.head, self.gen, self.value_embed)

    def loss(self, xb, yb) -> Tensor:
        """Mean squared error between forward(xb) and targets (B, H, N)."""
        pred = self.forward(xb)
        if not isinstance(yb, Tensor):
            yb = Tensor(yb)
        if yb.ndim == 2:
            yb = yb.reshape(1, *yb.shape)
        if pred.shape != yb.shape:
            raise ShapeError(f"forecast shape {pred.shape} != target shape {yb.shape}")
        err = pred - yb
        return (err * err).mean()
