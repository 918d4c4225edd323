"""Soft-attention multi-hop composition of predicate matrices.

Orientation: M_k[i, j] = 1 iff P_k(x_i, x_j). Chain products compose left to
right, so entry (i, j) of M_a @ M_b counts paths x_i -P_a-> z -P_b-> x_j and a
query score is v_x^T kappa v_x'.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from src.numerics import tensor as tn
from src.numerics.tensor import Tensor
from src.symbolic.vocabulary import SymbolicState
from src.utils.errors import DimensionError, VocabularyError


Matrices = Union[Tensor, np.ndarray, SymbolicState]


@dataclass
class AttentionWeights:
    """Predicate attention S_phi, shape (..., T, N), and path attention S_psi, shape (..., T).

    Row t of `predicate` is the distribution over predicates composed at hop t+1;
    entry t of `path` weights chains of length t+1.
    """

    predicate: Tensor
    path: Tensor

    @property
    def steps(self) -> int:
        return self.predicate.shape[-2]

    @property
    def n_predicates(self) -> int:
        return self.predicate.shape[-1]

    def check(self, tolerance: float = 1e-9) -> None:
        """Raise unless every distribution is nonnegative and sums to one."""
        if self.path.shape[-1] != self.steps:
            raise DimensionError(f'path attention has {self.path.shape[-1]} entries for {self.steps} steps')
        for name, values in (('predicate', self.predicate.data), ('path', self.path.data)):
            if np.any(values < 0.0) or np.any(np.abs(values.sum(axis=-1) - 1.0) > tolerance):
                raise DimensionError(f'{name} attention is not a distribution')

    def numpy(self) -> tuple[np.ndarray, np.ndarray]:
        return self.predicate.numpy(), self.path.numpy()

    @classmethod
    def one_hot(cls, chain: list[int], n_predicates: int, steps: int) -> AttentionWeights:
        """Weights selecting exactly `chain` (length <= steps); later hops stay uniform."""
        if not 1 <= len(chain) <= steps:
            raise DimensionError(f'chain length {len(chain)} outside 1..{steps}')
        predicate = np.full((steps, n_predicates), 1.0 / n_predicates)
        for t, k in enumerate(chain):
            predicate[t] = 0.0
            predicate[t, k] = 1.0
        path = np.zeros(steps)
        path[len(chain) - 1] = 1.0
        return cls(Tensor(predicate), Tensor(path))


def _as_matrices(state: Matrices) -> Tensor:
    if isinstance(state, SymbolicState):
        return Tensor(state.matrices)
    return tn.as_tensor(state)


def mix_step(weights: Tensor, state: Matrices) -> Tensor:
    """Convex combination sum_k s_k M_k for one hop.

    Args:
        weights: Predicate distribution, shape (..., N).
        state: Predicate matrices, shape (..., N, X, X).

    Raises:
        DimensionError: If the distribution length differs from N.
    """
    weights, matrices = tn.as_tensor(weights), _as_matrices(state)
    if weights.shape[-1] != matrices.shape[-3]:
        raise DimensionError(f'{weights.shape[-1]} weights for {matrices.shape[-3]} predicates')
    return (weights.reshape(*weights.shape, 1, 1) * matrices).sum(axis=-3)


def hop(matrix: Tensor, v: Tensor) -> Tensor:
    """One hop v^(t) = M^(t) v^(t-1)."""
    return tn.matmul(matrix, v)


def kappa(weights: AttentionWeights, state: Matrices) -> Tensor:
    """Path-weighted sum of chain products over lengths 1..T.

    The partial product M^(1)...M^(t) is extended once per step, so T products
    are formed in total.
    """
    matrices = _as_matrices(state)
    predicate, path = weights.predicate, weights.path
    if path.shape[-1] != predicate.shape[-2]:
        raise DimensionError(f'path attention length {path.shape[-1]} != steps {predicate.shape[-2]}')
    total, product = None, None
    for t in range(predicate.shape[-2]):
        mixed = mix_step(predicate[..., t, :], matrices)
        product = mixed if product is None else tn.matmul(product, mixed)
        weight = path[..., t]
        term = weight.reshape(*weight.shape, 1, 1) * product
        total = term if total is None else total + term
    return total


def score(x: int, x_prime: int, kappa_matrix: Union[Tensor, np.ndarray]) -> float:
    """v_x^T kappa v_x', a single entry of the matrix."""
    k = tn.as_tensor(kappa_matrix)
    n = k.shape[-1]
    if not (0 <= x < n and 0 <= x_prime < n):
        raise VocabularyError(f'entity ids ({x}, {x_prime}) out of range for {n} entities')
    return float(k.data[..., x, x_prime])
