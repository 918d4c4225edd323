"""Proximal policy optimization with generalized advantage estimation."""
from __future__ import annotations

from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from loguru import logger

from src.envs.base import SymbolicEnv, action_atom
from src.numerics import tensor as tn
from src.numerics.optim import Adam
from src.numerics.tensor import Tape, Tensor, backward
from src.policy.acting import MASKED_LOGIT, ActMode, action_probabilities, select_index
from src.policy.network import PolicyNetwork
from src.policy.rollout import EpisodeCallback, EpisodeStats, Transition
from src.utils.errors import ContractError


@dataclass
class Trajectory:
    """One episode (or a contiguous fragment) with behaviour log-probabilities and critic values.

    `bootstrap_value` is the critic's estimate after the last transition when the
    fragment was cut without reaching a terminal state.
    """

    transitions: list[Transition] = field(default_factory=list)
    log_probs: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    bootstrap_value: float = 0.0

    def __len__(self) -> int:
        return len(self.transitions)

    def check(self) -> None:
        if not (len(self.transitions) == len(self.log_probs) == len(self.values)):
            raise ContractError('trajectory transitions, log-probs and values differ in length')


def gae(trajectory: Trajectory, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantages and value targets (advantage + value), unnormalized."""
    trajectory.check()
    n = len(trajectory)
    values = np.asarray(trajectory.values, dtype=np.float64)
    rewards = np.array([t.reward for t in trajectory.transitions], dtype=np.float64)
    dones = np.array([t.done for t in trajectory.transitions], dtype=np.float64)
    next_values = np.append(values[1:], trajectory.bootstrap_value)
    advantages = np.zeros(n)
    running = 0.0
    for i in reversed(range(n)):
        delta = rewards[i] + gamma * (1.0 - dones[i]) * next_values[i] - values[i]
        running = delta + gamma * lam * (1.0 - dones[i]) * running
        advantages[i] = running
    return advantages, advantages + values


def normalize_advantages(advantages: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Shift to mean 0 and scale to std 1 over the update batch."""
    return (advantages - advantages.mean()) / (advantages.std() + eps)


def clipped_surrogate(ratio: Tensor, advantages: np.ndarray, clip: float) -> Tensor:
    """min(r * A, clip(r, 1 - eps, 1 + eps) * A) per sample."""
    return tn.minimum(ratio * advantages, tn.clip(ratio, 1.0 - clip, 1.0 + clip) * advantages)


@dataclass
class PpoBatch:
    """Flattened training data of several trajectories."""

    states: list
    actions: np.ndarray
    mask_bias: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    @classmethod
    def from_trajectories(cls, trajectories: Sequence[Trajectory], gamma: float, lam: float) -> PpoBatch:
        if not trajectories or not any(len(t) for t in trajectories):
            raise ContractError('ppo needs at least one non-empty trajectory')
        advantages, returns = zip(*(gae(t, gamma, lam) for t in trajectories))
        transitions = [tr for t in trajectories for tr in t.transitions]
        masks = np.stack([tr.mask for tr in transitions])
        return cls(
            states=[tr.state for tr in transitions],
            actions=np.array([tr.action_index for tr in transitions]),
            mask_bias=np.where(masks, 0.0, MASKED_LOGIT),
            old_log_probs=np.array([lp for t in trajectories for lp in t.log_probs], dtype=np.float64),
            advantages=normalize_advantages(np.concatenate(advantages)),
            returns=np.concatenate(returns),
        )


def ppo_loss(
    network: PolicyNetwork,
    batch: PpoBatch,
    clip: float = 0.2,
    value_coef: float = 0.5,
    entropy_coef: float = 0.01,
) -> tuple[Tensor, dict[str, float]]:
    """Clipped surrogate + value_coef * value error - entropy_coef * entropy.

    Returns:
        The scalar loss and diagnostics (mean ratio, clip fraction, loss parts).
    """
    rows = np.arange(len(batch.actions))
    log_probs = tn.log_softmax(network.q_tensor(batch.states) + batch.mask_bias, axis=-1)
    taken = tn.take(log_probs, (rows, batch.actions))
    ratio = tn.exp(taken - batch.old_log_probs)
    policy_loss = -tn.mean(clipped_surrogate(ratio, batch.advantages, clip))
    value_loss = tn.mean(tn.square(network.value(batch.states) - batch.returns))
    entropy = -tn.mean(tn.tensor_sum(tn.exp(log_probs) * log_probs, axis=-1))
    loss = policy_loss + value_coef * value_loss - entropy_coef * entropy
    r = ratio.data
    diagnostics = {
        'loss': loss.item(),
        'policy_loss': policy_loss.item(),
        'value_loss': value_loss.item(),
        'entropy': entropy.item(),
        'mean_ratio': float(r.mean()),
        'clip_fraction': float(np.mean(np.abs(r - 1.0) > clip)),
    }
    return loss, diagnostics


def ppo_update(
    trajectories: Sequence[Trajectory],
    network: PolicyNetwork,
    optimizer: Adam,
    clip: float = 0.2,
    epochs: int = 4,
    gamma: float = 1.0,
    lam: float = 0.95,
    value_coef: float = 0.5,
    entropy_coef: float = 0.01,
) -> dict[str, float]:
    """Full-batch gradient steps, one per epoch, on the collected trajectories."""
    batch = PpoBatch.from_trajectories(trajectories, gamma, lam)
    diagnostics: dict[str, float] = {}
    for _ in range(epochs):
        with Tape() as tape:
            loss, diagnostics = ppo_loss(network, batch, clip, value_coef, entropy_coef)
        diagnostics['grad_norm'] = optimizer.step(backward(tape, loss))
    return diagnostics


def collect_trajectory(env: SymbolicEnv, network: PolicyNetwork, rng: np.random.Generator) -> tuple[Trajectory, float]:
    """Sample one episode with the softmax policy; returns it with its evaluation score."""
    trajectory = Trajectory()
    state = env.reset(int(rng.integers(2**31)))
    score = 0.0
    while True:
        mask = env.action_mask(state)
        with tn.no_grad():
            q = network.q_tensor(state).data[0]
            value = network.value(state).item()
        index = select_index(q, mask, ActMode.SOFTMAX, rng)
        probability = action_probabilities(q, mask)[index]
        action = action_atom(index, env.vocabulary)
        result = env.step(action)
        trajectory.transitions.append(
            Transition(state, action, result.reward, result.state, result.done, index, mask, env.action_mask(result.state))
        )
        trajectory.log_probs.append(float(np.log(probability)))
        trajectory.values.append(value)
        score += result.score
        state = result.state
        if result.done or result.truncated:
            if not result.done:
                with tn.no_grad():
                    trajectory.bootstrap_value = network.value(state).item()
            return trajectory, score


@dataclass
class PpoHyper:
    episodes: int = 2000
    batch_episodes: int = 32
    clip: float = 0.2
    epochs: int = 4
    gamma: float = 1.0
    lam: float = 0.95
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    log_every: int = 50


@dataclass
class PpoState:
    step: int = 0
    episode: int = 0
    updates: int = 0
    curve: list[tuple[int, float]] = field(default_factory=list)
    diagnostics: dict[str, float] = field(default_factory=dict)


def ppo_train(
    env: SymbolicEnv,
    network: PolicyNetwork,
    optimizer: Adam,
    hyper: PpoHyper,
    rng: np.random.Generator,
    on_episode: Optional[EpisodeCallback] = None,
) -> PpoState:
    """Collect `batch_episodes` episodes, update, repeat until `episodes` are used."""
    progress = PpoState()
    recent: deque[float] = deque(maxlen=hyper.log_every)
    while progress.episode < hyper.episodes:
        batch: list[Trajectory] = []
        for _ in range(min(hyper.batch_episodes, hyper.episodes - progress.episode)):
            trajectory, score = collect_trajectory(env, network, rng)
            batch.append(trajectory)
            progress.step += len(trajectory)
            progress.curve.append((progress.step, score))
            recent.append(score)
            if on_episode is not None:
                reward = float(sum(t.reward for t in trajectory.transitions))
                on_episode(EpisodeStats(progress.episode, progress.step, score, reward, len(trajectory)))
            progress.episode += 1
            if progress.episode % hyper.log_every == 0:
                logger.info(f'ppo episode {progress.episode}: mean score {np.mean(recent):.3f}')
        progress.diagnostics = ppo_update(
            batch, network, optimizer, hyper.clip, hyper.epochs, hyper.gamma, hyper.lam, hyper.value_coef, hyper.entropy_coef
        )
        progress.updates += 1
        logger.debug(f'ppo update {progress.updates}: {progress.diagnostics}')
    return progress
