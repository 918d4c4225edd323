"""Adaptive-moment gradient descent over a `ParameterSet`."""
from typing import Optional

import numpy as np

from src.numerics.layers import ParameterSet
from src.numerics.tensor import Gradients


class Adam:
    """Momentum plus per-parameter RMS scaling.

    A learning rate of 0 leaves every parameter bit-identical.
    """

    def __init__(
        self,
        params: ParameterSet,
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        max_grad_norm: Optional[float] = None,
    ):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.max_grad_norm = max_grad_norm
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self, grads: Gradients) -> float:
        """Apply one update and return the (pre-clipping) global gradient norm."""
        norm = grads.global_norm(list(self.params))
        scale = 1.0
        if self.max_grad_norm is not None and norm > self.max_grad_norm:
            scale = self.max_grad_norm / (norm + 1e-12)
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for name, param in self.params.items():
            g = grads[param] * scale
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            update = (self.m[name] / correction1) / (np.sqrt(self.v[name] / correction2) + self.eps)
            if self.lr != 0.0:
                param.data = param.data - self.lr * update
        return norm

    def state(self) -> dict[str, object]:
        return {
            't': self.t,
            'm': {k: v.copy() for k, v in self.m.items()},
            'v': {k: v.copy() for k, v in self.v.items()},
        }

    def load_state(self, t: int, m: dict[str, np.ndarray], v: dict[str, np.ndarray]) -> None:
        self.t = t
        self.m = {k: np.asarray(m[k], dtype=np.float64).copy() for k in self.m}
        self.v = {k: np.asarray(v[k], dtype=np.float64).copy() for k in self.v}
