"""Transitions, episode statistics and policy evaluation rollouts."""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional

import numpy as np
from loguru import logger

from src.envs.base import SymbolicEnv, action_atom
from src.symbolic.vocabulary import GroundAtom, SymbolicState


Chooser = Callable[[SymbolicState, np.ndarray], int]


@dataclass(frozen=True)
class Transition:
    """(s, a, r, s', done) plus the action's universe index and the allowed-action masks."""

    state: SymbolicState
    action: GroundAtom
    reward: float
    next_state: SymbolicState
    done: bool
    action_index: int
    mask: np.ndarray
    next_mask: np.ndarray


@dataclass(frozen=True)
class EpisodeStats:
    """Summary of one finished episode; `score` is the evaluation return."""

    episode: int
    total_steps: int
    score: float
    reward: float
    length: int
    atoms: Optional[list[list[str]]] = None


EpisodeCallback = Callable[[EpisodeStats], None]


def run_episode(
    env: SymbolicEnv,
    choose: Chooser,
    seed: Optional[int] = None,
    record_atoms: bool = False,
) -> tuple[float, float, int, Optional[list[list[str]]]]:
    """Roll out one episode; returns (score, training reward, length, atoms per step)."""
    state = env.reset(seed)
    score = reward = 0.0
    length = 0
    atoms: Optional[list[list[str]]] = [] if record_atoms else None
    while True:
        index = choose(state, env.action_mask(state))
        action = action_atom(index, env.vocabulary)
        result = env.step(action)
        if atoms is not None:
            atoms.append([env.vocabulary.format_atom(action)])
        score += result.score
        reward += result.reward
        length += 1
        state = result.state
        if result.done or result.truncated:
            return score, reward, length, atoms


def evaluate_policy(
    env: SymbolicEnv,
    choose: Chooser,
    episodes: int,
    seed: int = 0,
    on_episode: Optional[EpisodeCallback] = None,
    record_atoms: bool = False,
) -> list[float]:
    """Scores of `episodes` rollouts; episode i resets the env with seed + i."""
    scores = []
    total_steps = 0
    for i in range(episodes):
        score, reward, length, atoms = run_episode(env, choose, seed + i, record_atoms)
        total_steps += length
        scores.append(score)
        if on_episode is not None:
            on_episode(EpisodeStats(i, total_steps, score, reward, length, atoms))
    if scores:
        logger.info(f'📊 evaluated {episodes} episodes: mean {np.mean(scores):.4f} ± {np.std(scores):.4f}')
    return scores


def summarize(scores: list[float]) -> tuple[float, float]:
    """Mean and population standard deviation."""
    arr = np.asarray(scores, dtype=np.float64)
    return float(arr.mean()), float(arr.std())
