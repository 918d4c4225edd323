"""Action selection over the masked action universe."""
from __future__ import annotations

from enum import Enum
from typing import Optional

import numpy as np

from src.envs.base import action_atom
from src.numerics import tensor as tn
from src.policy.network import PolicyNetwork
from src.symbolic.vocabulary import GroundAtom, SymbolicState
from src.utils.errors import ContractError


MASKED_LOGIT = -1e9


class ActMode(str, Enum):
    """How Q values become an action."""

    GREEDY = 'greedy'
    SOFTMAX = 'softmax'


def masked_logits(q: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, q, MASKED_LOGIT)


def action_probabilities(q: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over the allowed atoms; masked atoms get probability 0."""
    if not mask.any():
        raise ContractError('no action atom is available')
    logits = masked_logits(q, mask)
    e = np.exp(logits - logits.max())
    e = np.where(mask, e, 0.0)
    return e / e.sum()


def select_index(
    q: np.ndarray,
    mask: np.ndarray,
    mode: ActMode,
    rng: np.random.Generator,
    epsilon: float = 0.0,
) -> int:
    """Pick an index of the action universe.

    Greedy mode explores uniformly with probability `epsilon` and otherwise
    takes the first maximum, i.e. the lowest (predicate, subject, object).
    Softmax mode samples proportionally to exp(Q).

    Raises:
        ContractError: If the mask allows nothing.
    """
    allowed = np.flatnonzero(mask)
    if allowed.size == 0:
        raise ContractError('no action atom is available')
    if mode is ActMode.SOFTMAX:
        cumulative = np.cumsum(action_probabilities(q, mask))
        u = rng.random() * cumulative[-1]
        return int(min(np.searchsorted(cumulative, u, side='right'), q.size - 1))
    if rng.random() < epsilon:
        return int(allowed[rng.integers(allowed.size)])
    return int(np.argmax(masked_logits(q, mask)))


def act(
    state: SymbolicState,
    network: PolicyNetwork,
    mode: ActMode,
    rng: np.random.Generator,
    mask: Optional[np.ndarray] = None,
    epsilon: float = 0.0,
) -> GroundAtom:
    """Choose an action atom for `state`; `mask` defaults to the whole universe."""
    with tn.no_grad():
        q = network.q_tensor(state).data[0]
    mask = np.ones(q.size, dtype=bool) if mask is None else mask
    return action_atom(select_index(q, mask, mode, rng, epsilon), network.vocab)


def network_chooser(network: PolicyNetwork, mode: ActMode, rng: np.random.Generator, epsilon: float = 0.0):
    """Callable (state, mask) -> action index for `evaluate_policy`."""

    def choose(state: SymbolicState, mask: np.ndarray) -> int:
        with tn.no_grad():
            q = network.q_tensor(state).data[0]
        return select_index(q, mask, mode, rng, epsilon)

    return choose
