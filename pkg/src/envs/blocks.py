"""Blocks World with UNSTACK, STACK and ON goals.

Blocks `a`..`g` plus the `floor`. A core state is the support of every block
(`-1` inactive, 7 for the floor) and the ON goal pair, if any.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from src.envs.base import Outcome, SymbolicEnv
from src.symbolic.syntax import format_piles, parse_piles
from src.symbolic.vocabulary import GroundAtom, SymbolicState, Vocabulary
from src.utils.errors import ConfigError, ContractError
from src.utils.models import Task


BLOCK_NAMES = ('a', 'b', 'c', 'd', 'e', 'f', 'g')
FLOOR = len(BLOCK_NAMES)
ON, TOP, GOAL_ON, MOVE = 0, 1, 2, 3

BLOCKS_VOCABULARY = Vocabulary(
    entities=BLOCK_NAMES + ('floor',),
    state_predicates=('On', 'Top', 'GoalOn'),
    action_predicates=('Move',),
    unary_predicates=('Top',),
)

Core = tuple[tuple[int, ...], Optional[tuple[int, int]]]
MOVES = {(x, y): GroundAtom(MOVE, x, y) for x in range(FLOOR + 1) for y in range(FLOOR + 1)}


class BlocksConfig(BaseModel):
    """Task, bottom-first initial piles and reward shape of one Blocks World."""

    task: Task = Task.UNSTACK
    piles: list[list[str]] = Field(default_factory=lambda: [['a', 'b', 'c', 'd']])
    goal: Optional[tuple[str, str]] = None
    relabel: bool = False
    masking: bool = False
    step_penalty: float = -0.02
    success_reward: float = 1.0
    horizon: int = Field(default=50, gt=0)

    @model_validator(mode='after')
    def _check_piles(self) -> BlocksConfig:
        names = [name for pile in self.piles for name in pile]
        if not names or any(not pile for pile in self.piles):
            raise ValueError('piles must be non-empty')
        unknown = sorted(set(names) - set(BLOCK_NAMES))
        if unknown:
            raise ValueError(f'unknown blocks {unknown} in piles')
        if len(set(names)) != len(names):
            raise ValueError(f'piles {format_piles(self.piles)} repeat a block')
        if self.task is Task.ON:
            if self.goal is None:
                self.goal = ('a', 'b')
            if self.goal[0] == self.goal[1] or not set(self.goal) <= set(names):
                raise ValueError(f'goal {self.goal} must name two distinct blocks from the piles')
        return self

    @classmethod
    def from_text(cls, task: Task, piles: str, **kwargs) -> BlocksConfig:
        try:
            return cls(task=task, piles=parse_piles(piles), **kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def n_blocks(self) -> int:
        return sum(len(pile) for pile in self.piles)


class BlocksWorld(SymbolicEnv):
    """Move(x, y) puts clear block x onto the floor or a clear block y; anything else is a no-op."""

    def __init__(self, config: BlocksConfig, seed: int = 0):
        super().__init__(seed)
        self.config = config
        self.horizon = config.horizon
        self.masking = config.masking
        self._arrivals: dict[Core, Outcome] = {}

    @property
    def vocabulary(self) -> Vocabulary:
        return BLOCKS_VOCABULARY

    def initial_core(self, rng: Optional[np.random.Generator] = None) -> Core:
        used = sorted(BLOCK_NAMES.index(name) for pile in self.config.piles for name in pile)
        targets = used
        if self.config.relabel and rng is not None:
            targets = sorted(int(i) for i in rng.choice(FLOOR, size=len(used), replace=False))
        relabel = dict(zip(used, targets))
        support = [-1] * FLOOR
        for pile in self.config.piles:
            below = FLOOR
            for name in pile:
                block = relabel[BLOCK_NAMES.index(name)]
                support[block] = below
                below = block
        goal = None
        if self.config.task is Task.ON:
            gx, gy = self.config.goal
            goal = (relabel[BLOCK_NAMES.index(gx)], relabel[BLOCK_NAMES.index(gy)])
        return tuple(support), goal

    def encode_core(self, core: Core) -> SymbolicState:
        support, goal = core
        matrices = np.zeros((BLOCKS_VOCABULARY.n_predicates, FLOOR + 1, FLOOR + 1))
        for block, below in enumerate(support):
            if below < 0:
                continue
            matrices[ON, block, below] = 1.0
            if block not in support:
                matrices[TOP, block, block] = 1.0
        if goal is not None:
            matrices[GOAL_ON, goal[0], goal[1]] = 1.0
        return SymbolicState(matrices)

    def decode_state(self, state: SymbolicState) -> Core:
        on = state.matrices[ON]
        support = tuple(int(np.argmax(on[b])) if on[b].any() else -1 for b in range(FLOOR))
        goal_atoms = np.argwhere(state.matrices[GOAL_ON] == 1.0)
        goal = (int(goal_atoms[0][0]), int(goal_atoms[0][1])) if len(goal_atoms) else None
        return support, goal

    def core_action_atoms(self, core: Core) -> list[GroundAtom]:
        active = [b for b, below in enumerate(core[0]) if below >= 0] + [FLOOR]
        return [MOVES[x, y] for x in active for y in active if x != y]

    def is_valid(self, core: Core, action: GroundAtom) -> bool:
        support = core[0]
        x, y = action.subject, action.obj
        if x == FLOOR or support[x] < 0 or x in support or x == y:
            return False
        return y == FLOOR or (support[y] >= 0 and y not in support)

    def is_goal(self, core: Core) -> bool:
        support, goal = core
        active = [b for b, below in enumerate(support) if below >= 0]
        if self.config.task is Task.UNSTACK:
            return all(support[b] == FLOOR for b in active)
        if self.config.task is Task.STACK:
            return all(support[b] == below for b, below in zip(active, [FLOOR] + active[:-1]))
        return goal is not None and support[goal[0]] == goal[1]

    def outcomes(self, core: Core, action: GroundAtom) -> list[Outcome]:
        """Deterministic result of `blocks_step`.

        Raises:
            ContractError: If the action predicate is not Move.
        """
        BLOCKS_VOCABULARY.check(action)
        if action.predicate != MOVE:
            raise ContractError(f'{BLOCKS_VOCABULARY.format_atom(action)} is not a Move action')
        next_core = core
        if self.is_valid(core, action):
            support = list(core[0])
            support[action.subject] = action.obj
            next_core = (tuple(support), core[1])
        return [self._arrival(next_core)]

    def _arrival(self, core: Core) -> Outcome:
        outcome = self._arrivals.get(core)
        if outcome is None:
            done = self.is_goal(core)
            reward = self.config.step_penalty + (self.config.success_reward if done else 0.0)
            outcome = self._arrivals[core] = Outcome(1.0, core, reward, reward, done)
        return outcome

    def expand(self, core: Core) -> list[tuple[GroundAtom, list[Outcome]]]:
        """Base expansion with the validity test hoisted out of the atom loop."""
        support, goal = core
        active = [b for b, below in enumerate(support) if below >= 0]
        clear = {b for b in active if b not in support}
        targets = active + [FLOOR]
        stay = [self._arrival(core)]
        expanded = []
        for x in targets:
            for y in targets:
                if x == y:
                    continue
                if x in clear and (y == FLOOR or y in clear):
                    moved = list(support)
                    moved[x] = y
                    expanded.append((MOVES[x, y], [self._arrival((tuple(moved), goal))]))
                else:
                    expanded.append((MOVES[x, y], stay))
        return expanded


def blocks_reset(config: BlocksConfig, rng: Optional[np.random.Generator] = None) -> SymbolicState:
    """Encode the initial piles, relabeled when `config.relabel` and `rng` are given."""
    env = BlocksWorld(config)
    return env.encode_core(env.initial_core(rng))


def blocks_step(config: BlocksConfig, state: SymbolicState, action: GroundAtom) -> tuple[SymbolicState, float, bool]:
    env = BlocksWorld(config)
    outcome = env.outcomes(env.decode_state(state), action)[0]
    return env.encode_core(outcome.core), outcome.reward, outcome.done
