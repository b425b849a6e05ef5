"""Named parameters and the Adam update rule.

Parameters are Tensors with a dotted name (``encoder.layers.0.attn.wq``)
and a frozen flag. Frozen parameters still participate in forward passes
and receive no updates; the optimizer skips them entirely.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError
from .tensor import Tensor


class Parameter(Tensor):
    __slots__ = ("name", "frozen")

    def __init__(self, name: str, data, frozen: bool = False):
        super().__init__(data, requires_grad=not frozen)
        self.name = name
        self.frozen = frozen

    def __repr__(self) -> str:
        tag = "frozen" if self.frozen else "trainable"
        return f"Parameter({self.name!r}, shape={self.shape}, {tag})"


class Adam:
    """Adam with bias correction.

    update: p -= lr * m_hat / (sqrt(v_hat) + eps)

    Moment buffers are kept per parameter name, created lazily on the
    first step so late-registered parameters are handled transparently.
    """

    def __init__(self, params: list[Parameter], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p in self.params:
            if p.frozen:
                continue
            if p.grad is None:
                raise NumericError(
                    f"parameter {p.name!r} is trainable but received no gradient; "
                    "it is disconnected from the loss")
            g = p.grad
            m = self._m.get(p.name)
            if m is None:
                m = self._m[p.name] = np.zeros_like(p.data)
                self._v[p.name] = np.zeros_like(p.data)
            v = self._v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
