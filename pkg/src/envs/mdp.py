"""Exhaustive state enumeration and value iteration."""
from __future__ import annotations

from collections import deque
from collections.abc import Hashable
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from loguru import logger

from src.envs.base import SymbolicEnv, action_index
from src.symbolic.vocabulary import GroundAtom, SymbolicState
from src.utils.errors import CapacityError, ContractError


STATE_CAP = 1_000_000

RewardKind = Literal['score', 'train']


@dataclass
class EnumeratedMdp:
    """Tabular MDP: outcome k of action a in state s leads to `next[s, a, k]` with `probs[s, a, k]`.

    Actions are per-state lists padded to a common width; padded slots are
    self-loops with zero reward and are never chosen (`action_valid` is False).
    """

    cores: list[Hashable]
    actions: list[list[GroundAtom]]
    next: np.ndarray
    probs: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    action_valid: np.ndarray
    terminal: np.ndarray
    gamma: float
    horizon: Optional[int]
    initial: int = 0
    index: dict[Hashable, int] = field(default_factory=dict)

    @property
    def n_states(self) -> int:
        return len(self.cores)

    def check(self) -> None:
        if np.any((self.next < 0) | (self.next >= self.n_states)):
            raise ContractError('transition table holds an invalid state index')
        sums = self.probs.sum(axis=-1)
        if not np.allclose(sums[self.action_valid], 1.0, atol=1e-12):
            raise ContractError('outcome probabilities do not sum to one')


@dataclass
class ValueResult:
    """Optimal values, state-action values and the optimal return from the initial state."""

    values: np.ndarray
    q: np.ndarray
    initial_return: float
    backups: int


def enumerate_mdp(
    env: SymbolicEnv,
    gamma: float = 1.0,
    reward: RewardKind = 'score',
    horizon: Optional[int] = -1,
    cap: int = STATE_CAP,
) -> EnumeratedMdp:
    """Breadth-first expansion of every state reachable from the env's seed states.

    Args:
        env: Environment whose transition model is enumerated.
        gamma: Discount stored on the MDP.
        reward: `score` for evaluation returns, `train` for the shaped training reward.
        horizon: Backups for finite-horizon value iteration; -1 takes the env horizon, None means infinite.
        cap: Maximum number of states.

    Raises:
        CapacityError: If more than `cap` states are reachable.
    """
    seeds = env.enumeration_seeds()
    index: dict[Hashable, int] = {}
    cores: list[Hashable] = []
    queue: deque[Hashable] = deque()
    for core in [env.initial_core()] + seeds:
        if core not in index:
            index[core] = len(cores)
            cores.append(core)
            queue.append(core)
    actions: list[list[GroundAtom]] = []
    # one entry per (state, action, outcome)
    state_ids: list[int] = []
    action_ids: list[int] = []
    outcome_ids: list[int] = []
    targets: list[int] = []
    probabilities: list[float] = []
    values: list[float] = []
    ends: list[bool] = []
    train = reward == 'train'
    n_outcomes = 1
    while queue:
        core = queue.popleft()
        s = len(actions)
        atoms = []
        for a, (atom, options) in enumerate(env.expand(core)):
            atoms.append(atom)
            n_outcomes = max(n_outcomes, len(options))
            for k, outcome in enumerate(options):
                target = index.get(outcome.core)
                if target is None:
                    if len(cores) >= cap:
                        raise CapacityError(f'more than {cap} reachable states')
                    target = index[outcome.core] = len(cores)
                    cores.append(outcome.core)
                    queue.append(outcome.core)
                state_ids.append(s)
                action_ids.append(a)
                outcome_ids.append(k)
                targets.append(target)
                probabilities.append(outcome.probability)
                values.append(outcome.reward if train else outcome.score)
                ends.append(outcome.done)
        actions.append(atoms)
    n_states = len(cores)
    n_actions = max(len(a) for a in actions)
    shape = (n_states, n_actions, n_outcomes)
    next_ = np.tile(np.arange(n_states)[:, None, None], (1, n_actions, n_outcomes))
    probs, rewards, dones = np.zeros(shape), np.zeros(shape), np.zeros(shape, dtype=bool)
    action_valid = np.zeros((n_states, n_actions), dtype=bool)
    s_idx, a_idx, k_idx = (np.array(ids, dtype=np.int64) for ids in (state_ids, action_ids, outcome_ids))
    next_[s_idx, a_idx, k_idx] = targets
    probs[s_idx, a_idx, k_idx] = probabilities
    rewards[s_idx, a_idx, k_idx] = values
    dones[s_idx, a_idx, k_idx] = ends
    action_valid[s_idx, a_idx] = True
    terminal = np.array([env.is_goal(core) for core in cores])
    mdp = EnumeratedMdp(
        cores=cores,
        actions=actions,
        next=next_,
        probs=probs,
        rewards=rewards,
        dones=dones,
        action_valid=action_valid,
        terminal=terminal,
        gamma=gamma,
        horizon=env.horizon if horizon == -1 else horizon,
        initial=0,
        index=index,
    )
    logger.debug(f'enumerated {n_states} states, {n_actions} actions, {n_outcomes} outcomes')
    return mdp


def _backup(mdp: EnumeratedMdp, values: np.ndarray) -> np.ndarray:
    continuation = np.where(mdp.dones, 0.0, values[mdp.next])
    q = np.sum(mdp.probs * (mdp.rewards + mdp.gamma * continuation), axis=-1)
    q = np.where(mdp.action_valid, q, -np.inf)
    return np.where(mdp.terminal[:, None], 0.0, q)


def value_iteration(mdp: EnumeratedMdp, tolerance: float = 1e-12, max_backups: int = 1_000_000) -> ValueResult:
    """Bellman optimality backups.

    With a finite horizon exactly `horizon` backups are applied starting from
    zero values; otherwise backups run until the sup-norm change is below
    `tolerance`.

    Raises:
        ContractError: If gamma is 1 and there is no horizon.
    """
    if mdp.horizon is None and mdp.gamma >= 1.0:
        raise ContractError('value iteration needs gamma < 1 or a finite horizon')
    values = np.zeros(mdp.n_states)
    backups = 0
    while True:
        q = _backup(mdp, values)
        updated = q.max(axis=1)
        backups += 1
        delta = float(np.max(np.abs(updated - values)))
        values = updated
        if mdp.horizon is not None:
            if backups >= mdp.horizon:
                break
        elif delta < tolerance or backups >= max_backups:
            break
    return ValueResult(values, q, float(values[mdp.initial]), backups)


def optimal_return(env: SymbolicEnv, reward: RewardKind = 'score') -> float:
    """Optimal undiscounted return from the env's (unrandomized) initial state."""
    result = value_iteration(enumerate_mdp(env, gamma=1.0, reward=reward))
    return result.initial_return


class ScriptedPolicy:
    """Greedy with respect to the value-iteration Q table; ties go to the lowest action index."""

    def __init__(self, env: SymbolicEnv, reward: RewardKind = 'score'):
        self.env = env
        self.mdp = enumerate_mdp(env, gamma=1.0, reward=reward)
        self.result = value_iteration(self.mdp)

    def __call__(self, state: SymbolicState, mask: Optional[np.ndarray] = None) -> int:
        core = self.env.decode_state(state)
        if core not in self.mdp.index:
            raise ContractError('state was not reached during enumeration')
        s = self.mdp.index[core]
        atoms = self.mdp.actions[s]
        best = int(np.argmax(self.result.q[s, : len(atoms)]))
        return action_index(atoms[best], self.env.vocabulary)
