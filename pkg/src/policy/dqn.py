"""Double Q-learning with uniform experience replay."""
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
from src.policy.acting import ActMode, masked_logits, select_index
from src.policy.network import PolicyNetwork
from src.policy.rollout import EpisodeCallback, EpisodeStats, Transition
from src.utils.errors import ContractError


class ReplayBuffer:
    """Bounded FIFO of transitions with seeded uniform sampling (with replacement)."""

    def __init__(self, capacity: int, seed: int = 0):
        if capacity <= 0:
            raise ContractError(f'replay capacity must be positive, got {capacity}')
        self.capacity = capacity
        self.rng = np.random.default_rng(seed)
        self._items: deque[Transition] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def append(self, transition: Transition) -> None:
        self._items.append(transition)

    def sample(self, batch_size: int) -> list[Transition]:
        if not self._items:
            raise ContractError('cannot sample from an empty replay buffer')
        picks = self.rng.integers(len(self._items), size=batch_size)
        return [self._items[int(i)] for i in picks]


def double_q_targets(
    rewards: np.ndarray,
    dones: np.ndarray,
    q_next_online: np.ndarray,
    q_next_target: np.ndarray,
    gamma: float,
    next_masks: Optional[np.ndarray] = None,
) -> np.ndarray:
    """r + gamma * Q_target(s', argmax_a Q_online(s', a)); terminal transitions use r alone."""
    if next_masks is not None:
        q_next_online = masked_logits(q_next_online, next_masks)
    best = np.argmax(q_next_online, axis=-1)
    bootstrap = q_next_target[np.arange(len(best)), best]
    return rewards + gamma * np.where(dones, 0.0, bootstrap)


def td_loss(q_taken: Tensor, targets: np.ndarray) -> Tensor:
    """Mean squared TD error."""
    return tn.mean(tn.square(q_taken - targets))


def q_loss(batch: Sequence[Transition], network: PolicyNetwork, target: PolicyNetwork, gamma: float) -> Tensor:
    """Double-Q regression loss of a replay batch.

    Raises:
        ContractError: If the batch is empty.
    """
    if not batch:
        raise ContractError('q_loss needs a non-empty batch')
    states = [t.state for t in batch]
    next_states = [t.next_state for t in batch]
    actions = np.array([t.action_index for t in batch])
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    dones = np.array([t.done for t in batch])
    with tn.no_grad():
        online_next = network.q_tensor(next_states).data
        target_next = target.q_tensor(next_states).data
    targets = double_q_targets(rewards, dones, online_next, target_next, gamma, np.stack([t.next_mask for t in batch]))
    q_all = network.q_tensor(states)
    return td_loss(tn.take(q_all, (np.arange(len(batch)), actions)), targets)


@dataclass
class EpsilonSchedule:
    """Linear decay from `start` to `end` over the first `fraction` of `total` steps."""

    start: float = 1.0
    end: float = 0.05
    fraction: float = 0.4
    total: int = 50_000

    def __call__(self, step: int) -> float:
        span = max(1, int(self.fraction * self.total))
        progress = min(1.0, step / span)
        return self.start + progress * (self.end - self.start)


@dataclass
class DqnHyper:
    steps: int = 50_000
    gamma: float = 0.99
    batch_size: int = 64
    buffer_capacity: int = 100_000
    target_sync: int = 1000
    learning_starts: int = 1000
    train_every: int = 1
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    log_every: int = 50
    seed: int = 0


@dataclass
class DqnState:
    """Progress counters exposed to checkpointing."""

    step: int = 0
    episode: int = 0
    epsilon: float = 1.0
    curve: list[tuple[int, float]] = field(default_factory=list)


def dqn_train(
    env: SymbolicEnv,
    network: PolicyNetwork,
    optimizer: Adam,
    hyper: DqnHyper,
    rng: np.random.Generator,
    on_episode: Optional[EpisodeCallback] = None,
) -> DqnState:
    """Epsilon-greedy interaction, replay, Double-Q updates and periodic target sync.

    Returns:
        Counters plus the learning curve as (total steps, episode score) pairs.
    """
    target = network.clone()
    buffer = ReplayBuffer(hyper.buffer_capacity, hyper.seed)
    state_info = DqnState(epsilon=hyper.epsilon(0))
    if hyper.steps <= 0:
        return state_info
    state = env.reset(int(rng.integers(2**31)))
    mask = env.action_mask(state)
    score = reward_sum = 0.0
    length = 0
    recent: deque[float] = deque(maxlen=hyper.log_every)
    for step in range(hyper.steps):
        epsilon = hyper.epsilon(step)
        with tn.no_grad():
            q = network.q_tensor(state).data[0]
        index = select_index(q, mask, ActMode.GREEDY, rng, epsilon)
        action = action_atom(index, env.vocabulary)
        result = env.step(action)
        next_mask = env.action_mask(result.state)
        buffer.append(Transition(state, action, result.reward, result.state, result.done, index, mask, next_mask))
        score += result.score
        reward_sum += result.reward
        length += 1
        state, mask = result.state, next_mask

        if step >= hyper.learning_starts and step % hyper.train_every == 0 and len(buffer) >= hyper.batch_size:
            with Tape() as tape:
                loss = q_loss(buffer.sample(hyper.batch_size), network, target, hyper.gamma)
            optimizer.step(backward(tape, loss))
        if (step + 1) % hyper.target_sync == 0:
            target.load_from(network)

        state_info.step, state_info.epsilon = step + 1, epsilon
        if result.done or result.truncated:
            stats = EpisodeStats(state_info.episode, step + 1, score, reward_sum, length)
            state_info.curve.append((step + 1, score))
            recent.append(score)
            if on_episode is not None:
                on_episode(stats)
            state_info.episode += 1
            if state_info.episode % hyper.log_every == 0:
                logger.info(
                    f'dqn step {step + 1}: episode {state_info.episode}, mean score {np.mean(recent):.2f}, epsilon {epsilon:.3f}'
                )
            state = env.reset(int(rng.integers(2**31)))
            mask = env.action_mask(state)
            score = reward_sum = 0.0
            length = 0
    return state_info
