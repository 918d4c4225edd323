"""Parameter storage, feed-forward layers and multi-head dot-product attention."""
from __future__ import annotations

import math
from collections.abc import Iterator, Mapping
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator

from src.numerics import tensor as tn
from src.numerics.tensor import Tensor
from src.utils.errors import ConfigError, DimensionError


class Activation(str, Enum):
    """Activation applied after an affine layer."""

    RELU = 'relu'
    IDENTITY = 'identity'


class MlpSpec(BaseModel):
    """Layer widths and activations of a feed-forward network.

    `activation` is applied after every hidden layer, `output_activation`
    after the last one.
    """

    widths: list[int] = Field(min_length=2)
    activation: Activation = Activation.RELU
    output_activation: Activation = Activation.IDENTITY
    seed: int = 0

    @field_validator('widths')
    @classmethod
    def _positive(cls, widths: list[int]) -> list[int]:
        if any(w <= 0 for w in widths):
            raise ValueError(f'layer widths must be positive, got {widths}')
        return widths

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1


class ParameterSet:
    """Ordered, named collection of trainable tensors."""

    def __init__(self) -> None:
        self._params: dict[str, Tensor] = {}

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._params.items())

    def names(self) -> list[str]:
        return list(self._params)

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ConfigError(f'duplicate parameter name {name!r}')
        param = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = param
        return param

    def uniform(self, name: str, shape: tuple[int, ...], fan_in: int, rng: np.random.Generator) -> Tensor:
        """Register a parameter drawn from U[-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
        bound = 1.0 / math.sqrt(fan_in)
        return self.add(name, rng.uniform(-bound, bound, size=shape))

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        missing = set(self._params) - set(arrays)
        if missing:
            raise ConfigError(f'missing parameters: {sorted(missing)}')
        for name, param in self._params.items():
            value = np.asarray(arrays[name], dtype=np.float64)
            if value.shape != param.shape:
                raise DimensionError(f'{name}: expected {param.shape}, got {value.shape}')
            param.data = value.copy()

    def zero_(self) -> None:
        for param in self._params.values():
            param.data = np.zeros_like(param.data)

    def count(self) -> int:
        return int(sum(p.size for p in self._params.values()))


def _activate(x: Tensor, kind: Activation) -> Tensor:
    return tn.relu(x) if kind is Activation.RELU else x


class Mlp:
    """Stack of affine layers whose weights live in a shared `ParameterSet`."""

    def __init__(self, params: ParameterSet, prefix: str, spec: MlpSpec, rng: Optional[np.random.Generator] = None):
        self.spec = spec
        self.prefix = prefix
        rng = rng if rng is not None else np.random.default_rng(spec.seed)
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        for i, (fan_in, fan_out) in enumerate(zip(spec.widths[:-1], spec.widths[1:])):
            self.weights.append(params.uniform(f'{prefix}.w{i}', (fan_in, fan_out), fan_in, rng))
            self.biases.append(params.uniform(f'{prefix}.b{i}', (fan_out,), fan_in, rng))

    def __call__(self, x: Tensor) -> Tensor:
        return mlp_forward(self, x)


def mlp_forward(mlp: Mlp, x: Tensor) -> Tensor:
    """Apply every layer of `mlp` to the last axis of `x`.

    Raises:
        DimensionError: If the input width differs from the first layer width.
    """
    x = tn.as_tensor(x)
    if x.shape[-1] != mlp.spec.widths[0]:
        raise DimensionError(f'{mlp.prefix}: input width {x.shape[-1]} != {mlp.spec.widths[0]}')
    last = mlp.spec.n_layers - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        x = tn.matmul(x, w) + b
        x = _activate(x, mlp.spec.output_activation if i == last else mlp.spec.activation)
    return x


def _split_heads(x: Tensor, heads: int) -> Tensor:
    *lead, n, d = x.shape
    x = x.reshape(*lead, n, heads, d // heads)
    k = len(lead)
    return x.transpose(*range(k), k + 1, k, k + 2)


def _merge_heads(x: Tensor) -> Tensor:
    *lead, h, n, dh = x.shape
    k = len(lead)
    x = x.transpose(*range(k), k + 1, k, k + 2)
    return x.reshape(*lead, n, h * dh)


def mhdpa(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    heads: int,
    out_proj: Optional[Tensor] = None,
) -> tuple[Tensor, Tensor]:
    """Multi-head dot-product attention.

    Args:
        q: Queries, shape (..., n_q, d).
        k: Keys, shape (..., n_k, d).
        v: Values, shape (..., n_k, d).
        heads: Number of heads; must divide d.
        out_proj: Optional (d, d_out) projection applied to the concatenated heads.

    Returns:
        The attention averaged over heads, shape (..., n_q, n_k), and the output.
    """
    q, k, v = tn.as_tensor(q), tn.as_tensor(k), tn.as_tensor(v)
    d = q.shape[-1]
    if heads <= 0 or d % heads != 0:
        raise ConfigError(f'feature width {d} is not divisible into {heads} heads')
    if k.shape[-1] != d or v.shape[-1] != d:
        raise DimensionError(f'q/k/v widths differ: {q.shape}, {k.shape}, {v.shape}')
    if k.shape[-2] != v.shape[-2]:
        raise DimensionError(f'keys and values disagree on rows: {k.shape} vs {v.shape}')
    qh, kh, vh = _split_heads(q, heads), _split_heads(k, heads), _split_heads(v, heads)
    scores = tn.matmul(qh, tn.swap_last(kh)) * (1.0 / math.sqrt(d // heads))
    attention = tn.softmax(scores, axis=-1)
    output = _merge_heads(tn.matmul(attention, vh))
    if out_proj is not None:
        output = tn.matmul(output, out_proj)
    return attention.mean(axis=-3), output
