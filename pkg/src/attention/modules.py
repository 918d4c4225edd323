"""Hierarchical attention producing predicate and path-length distributions."""
from __future__ import annotations

from typing import Optional

import numpy as np
from loguru import logger

from src.numerics import tensor as tn
from src.numerics.layers import Mlp, MlpSpec, ParameterSet, mhdpa
from src.numerics.tensor import Tensor
from src.reasoning.kappa import AttentionWeights
from src.utils.errors import ConfigError


class _AttentionBlock:
    """Feed-forwards for Q, K, V followed by MHDPA and an output projection."""

    def __init__(self, params: ParameterSet, prefix: str, width: int, hidden: int, heads: int, rng: np.random.Generator):
        if width % heads != 0:
            raise ConfigError(f'{prefix}: width {width} is not divisible into {heads} heads')
        spec = MlpSpec(widths=[width, hidden, width])
        self.heads = heads
        self.ff_q = Mlp(params, f'{prefix}.q', spec, rng)
        self.ff_k = Mlp(params, f'{prefix}.k', spec, rng)
        self.ff_v = Mlp(params, f'{prefix}.v', spec, rng)
        self.out = params.uniform(f'{prefix}.out', (width, width), width, rng)

    def __call__(self, values: Tensor) -> tuple[Tensor, Tensor]:
        return mhdpa(self.ff_q(values), self.ff_k(values), self.ff_v(values), self.heads, self.out)


class PredicateAttentionStack:
    """Per-step attention blocks; step t reads the value matrix produced by step t-1."""

    def __init__(
        self,
        params: ParameterSet,
        width: int,
        steps: int,
        layers: int,
        heads: int,
        hidden: int,
        rng: np.random.Generator,
        prefix: str = 'predicate',
    ):
        self.width = width
        self.steps = steps
        self.layers = layers
        self.heads = heads
        self.blocks = [
            [_AttentionBlock(params, f'{prefix}.t{t}.l{layer}', width, hidden, heads, rng) for layer in range(layers)]
            for t in range(steps)
        ]


class PathAttentionHead:
    """Single learned query attending over pooled per-step value matrices."""

    def __init__(self, params: ParameterSet, width: int, hidden: int, heads: int, rng: np.random.Generator, prefix: str = 'path'):
        if width % heads != 0:
            raise ConfigError(f'{prefix}: width {width} is not divisible into {heads} heads')
        spec = MlpSpec(widths=[width, hidden, width])
        self.heads = heads
        self.query = params.uniform(f'{prefix}.query', (1, width), width, rng)
        self.ff_k = Mlp(params, f'{prefix}.k', spec, rng)
        self.ff_v = Mlp(params, f'{prefix}.v', spec, rng)


def predicate_attention(flat: Tensor, stack: PredicateAttentionStack) -> tuple[Tensor, list[Tensor]]:
    """Run the predicate submodule.

    Args:
        flat: Flattened states, shape (..., N, |X|^2).
        stack: Per-step parameters.

    Returns:
        S_phi with shape (..., T, N) and the value matrices V^(0)..V^(T).
    """
    flat = tn.as_tensor(flat)
    if flat.shape[-1] != stack.width:
        raise ConfigError(f'flat state width {flat.shape[-1]} != attention width {stack.width}')
    values = [flat]
    distributions = []
    current = flat
    for blocks in stack.blocks:
        attention = None
        for block in blocks:
            attention, current = block(current)
        # column mean: how much every query row attends to each predicate
        column = attention.mean(axis=-2)
        distributions.append(column / column.sum(axis=-1, keepdims=True))
        values.append(current)
    return tn.stack(distributions, axis=-2), values


def path_attention(values: list[Tensor], head: PathAttentionHead, steps: Optional[int] = None) -> Tensor:
    """Distribution over chain lengths 1..T from the T+1 value matrices.

    The entry belonging to V^(0) is dropped and the rest renormalized.
    """
    steps = len(values) - 1 if steps is None else steps
    if len(values) != steps + 1 or steps < 1:
        raise ConfigError(f'path attention needs {steps + 1} value matrices, got {len(values)}')
    pooled = tn.stack([v.mean(axis=-2) for v in values], axis=-2)
    attention, _ = mhdpa(head.query, head.ff_k(pooled), head.ff_v(pooled), head.heads)
    weights = attention[..., 0, 1:]
    return weights / weights.sum(axis=-1, keepdims=True)


class AttentionModule:
    """Predicate stack plus path head; parameters registered in a shared `ParameterSet`."""

    def __init__(
        self,
        params: ParameterSet,
        width: int,
        steps: int = 4,
        layers: int = 2,
        heads: int = 4,
        hidden: int = 64,
        rng: Optional[np.random.Generator] = None,
    ):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.steps = steps
        self.predicate = PredicateAttentionStack(params, width, steps, layers, heads, hidden, rng)
        self.path = PathAttentionHead(params, width, hidden, heads, rng)
        logger.debug(f'attention module: width={width} T={steps} L={layers} H={heads} hidden={hidden}')

    def forward(self, flat: Tensor) -> AttentionWeights:
        predicate, values = predicate_attention(flat, self.predicate)
        return AttentionWeights(predicate, path_attention(values, self.path, self.steps))

    __call__ = forward
