"""Attention, reasoning and per-action-predicate heads composed into Q values."""
from __future__ import annotations

from collections.abc import Sequence
from typing import Optional, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from src.attention.modules import AttentionModule
from src.envs.base import action_atom, action_universe_size
from src.numerics import tensor as tn
from src.numerics.layers import Mlp, MlpSpec, ParameterSet
from src.numerics.tensor import Tensor
from src.reasoning.kappa import AttentionWeights, kappa
from src.symbolic.vocabulary import GroundAtom, SymbolicState, Vocabulary, stack_states
from src.utils.errors import ContractError, DimensionError


States = Union[SymbolicState, Sequence[SymbolicState], np.ndarray]


class NetworkSpec(BaseModel):
    """Sizes of every learned component."""

    steps: int = Field(default=4, ge=1)
    layers: int = Field(default=2, ge=1)
    heads: int = Field(default=4, ge=1)
    hidden: int = Field(default=64, ge=1)
    head_hidden: int = Field(default=64, ge=1)
    critic_hidden: int = Field(default=20, ge=1)
    critic: bool = False
    seed: int = 0


def as_batch(states: States) -> np.ndarray:
    """Predicate tensors as an array of shape (B, N, X, X)."""
    if isinstance(states, SymbolicState):
        return states.matrices[None]
    if isinstance(states, np.ndarray):
        return states if states.ndim == 4 else states[None]
    return stack_states(states)


class PolicyNetwork:
    """All parameters theta: attention module, one MLP_a per action predicate and an optional critic.

    Q(S, Act_a(x, x')) is entry (x, x') of MLP_a applied to the flattened kappa
    matrix, so every Q readout ends in an action predicate.
    """

    def __init__(self, vocab: Vocabulary, spec: Optional[NetworkSpec] = None):
        self.vocab = vocab
        self.spec = spec or NetworkSpec()
        rng = np.random.default_rng(self.spec.seed)
        width = vocab.n_entities**2
        self.params = ParameterSet()
        self.attention = AttentionModule(
            self.params, width, self.spec.steps, self.spec.layers, self.spec.heads, self.spec.hidden, rng
        )
        head_spec = MlpSpec(widths=[width, self.spec.head_hidden, width])
        self.heads = [Mlp(self.params, f'head.{name}', head_spec, rng) for name in vocab.action_predicates]
        self.critic = None
        if self.spec.critic:
            critic_spec = MlpSpec(widths=[vocab.n_predicates * width, self.spec.critic_hidden, 1])
            self.critic = Mlp(self.params, 'critic', critic_spec, rng)
        logger.debug(f'policy network with {self.params.count()} parameters')

    @property
    def universe_size(self) -> int:
        return action_universe_size(self.vocab)

    def _check(self, batch: np.ndarray) -> None:
        x = self.vocab.n_entities
        if batch.shape[1:] != (self.vocab.n_predicates, x, x):
            raise DimensionError(f'states of shape {batch.shape[1:]} do not match the vocabulary')

    def weights(self, states: States) -> AttentionWeights:
        batch = as_batch(states)
        self._check(batch)
        b, n, x, _ = batch.shape
        return self.attention(Tensor(batch.reshape(b, n, x * x)))

    def kappa(self, states: States) -> Tensor:
        batch = as_batch(states)
        return kappa(self.weights(batch), Tensor(batch))

    def q_tensor(self, states: States) -> Tensor:
        """Q for every atom of the action universe, shape (B, |P_a| * X^2)."""
        batch = as_batch(states)
        x = self.vocab.n_entities
        k = kappa(self.weights(batch), Tensor(batch)).reshape(batch.shape[0], x * x)
        return tn.concat([head(k) for head in self.heads], axis=-1)

    def value(self, states: States) -> Tensor:
        """Critic estimate per state, shape (B,)."""
        if self.critic is None:
            raise ContractError('this network was built without a critic')
        batch = as_batch(states)
        self._check(batch)
        flat = Tensor(batch.reshape(batch.shape[0], -1))
        return self.critic(flat).reshape(batch.shape[0])

    def clone(self) -> PolicyNetwork:
        twin = PolicyNetwork(self.vocab, self.spec)
        twin.load_from(self)
        return twin

    def load_from(self, other: PolicyNetwork) -> None:
        self.params.load_arrays(other.params.arrays())


def q_values(
    network: PolicyNetwork, state: SymbolicState, atoms: Optional[Sequence[GroundAtom]] = None
) -> dict[GroundAtom, float]:
    """Q for each grounded action atom; kappa is computed once for the state.

    Args:
        network: Parameters to evaluate.
        state: Current state.
        atoms: Atoms to report; every atom of the universe when omitted.
    """
    with tn.no_grad():
        q = network.q_tensor(state).data[0]
    vocab = network.vocab
    if atoms is None:
        atoms = [action_atom(i, vocab) for i in range(q.size)]
    x = vocab.n_entities
    return {atom: float(q[vocab.action_slot(atom.predicate) * x * x + atom.subject * x + atom.obj]) for atom in atoms}
