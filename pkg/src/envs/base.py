"""Environment protocol shared by Blocks World and KeyDoor.

An environment works on a small hashable `core` (its internal state) and
exposes it as a `SymbolicState`. Trainers, evaluators, the enumerator and rule
extraction only see the public methods defined here.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Hashable
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.symbolic.vocabulary import GroundAtom, SymbolicState, Vocabulary
from src.utils.errors import ContractError


@dataclass(frozen=True)
class Outcome:
    """One possible result of applying an action to a core state."""

    probability: float
    core: Hashable
    reward: float
    score: float
    done: bool


@dataclass(frozen=True)
class StepResult:
    """Next state, training reward, terminal flag and evaluation score of one step.

    `truncated` is set when the horizon ends the episode without reaching a goal.
    """

    state: SymbolicState
    reward: float
    done: bool
    score: float
    truncated: bool = False


class SymbolicEnv(ABC):
    """Episodic environment over grounded atoms."""

    horizon: int
    masking: bool = False

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self._core: Optional[Hashable] = None
        self._t = 0

    @property
    @abstractmethod
    def vocabulary(self) -> Vocabulary:
        """Entities and predicates of every state this env produces."""

    @abstractmethod
    def initial_core(self, rng: Optional[np.random.Generator] = None) -> Hashable:
        """Core state at the start of an episode; `rng` drives any randomization."""

    @abstractmethod
    def outcomes(self, core: Hashable, action: GroundAtom) -> list[Outcome]:
        """All results of `action`, with probabilities summing to one."""

    @abstractmethod
    def encode_core(self, core: Hashable) -> SymbolicState:
        """Predicate matrices for a core state."""

    @abstractmethod
    def decode_state(self, state: SymbolicState) -> Hashable:
        """Inverse of `encode_core`."""

    @abstractmethod
    def core_action_atoms(self, core: Hashable) -> list[GroundAtom]:
        """Action atoms an agent may attempt in `core`, ordered by index."""

    @abstractmethod
    def is_valid(self, core: Hashable, action: GroundAtom) -> bool:
        """Whether the env accepts `action` in `core`; invalid actions are no-ops."""

    @abstractmethod
    def is_goal(self, core: Hashable) -> bool:
        """Whether `core` is terminal."""

    def enumeration_seeds(self) -> list[Hashable]:
        """Core states the state-space enumeration starts from."""
        return [self.initial_core()]

    def expand(self, core: Hashable) -> list[tuple[GroundAtom, list[Outcome]]]:
        """Every action atom of `core` with its outcomes, in `core_action_atoms` order."""
        return [(atom, self.outcomes(core, atom)) for atom in self.core_action_atoms(core)]

    # public episode interface

    @property
    def state(self) -> SymbolicState:
        if self._core is None:
            raise ContractError('reset() must be called before reading the state')
        return self.encode_core(self._core)

    @property
    def t(self) -> int:
        return self._t

    def reset(self, seed: Optional[int] = None) -> SymbolicState:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self._core = self.initial_core(self.rng)
        self._t = 0
        return self.encode_core(self._core)

    def step(self, action: GroundAtom) -> StepResult:
        if self._core is None:
            raise ContractError('reset() must be called before step()')
        options = self.outcomes(self._core, action)
        chosen = options[0]
        if len(options) > 1:
            u = self.rng.random()
            cumulative = 0.0
            for option in options:
                cumulative += option.probability
                chosen = option
                if u < cumulative:
                    break
        self._core = chosen.core
        self._t += 1
        truncated = not chosen.done and self._t >= self.horizon
        return StepResult(self.encode_core(chosen.core), chosen.reward, chosen.done, chosen.score, truncated)

    def action_atoms(self, state: Optional[SymbolicState] = None) -> list[GroundAtom]:
        core = self._core if state is None else self.decode_state(state)
        return self.core_action_atoms(core)

    def valid_mask(self, state: Optional[SymbolicState] = None) -> np.ndarray:
        """Boolean mask over the action universe: True for atoms the env accepts as valid moves."""
        core = self._core if state is None else self.decode_state(state)
        mask = np.zeros(action_universe_size(self.vocabulary), dtype=bool)
        for atom in self.core_action_atoms(core):
            if self.is_valid(core, atom):
                mask[action_index(atom, self.vocabulary)] = True
        return mask

    def action_mask(self, state: Optional[SymbolicState] = None) -> np.ndarray:
        """Atoms a policy may choose: valid ones when masking, else every candidate."""
        if self.masking:
            return self.valid_mask(state)
        core = self._core if state is None else self.decode_state(state)
        mask = np.zeros(action_universe_size(self.vocabulary), dtype=bool)
        for atom in self.core_action_atoms(core):
            mask[action_index(atom, self.vocabulary)] = True
        return mask


def action_universe_size(vocab: Vocabulary) -> int:
    """Number of grounded action atoms |P_a| * |X|^2."""
    return len(vocab.action_predicates) * vocab.n_entities**2


def action_index(atom: GroundAtom, vocab: Vocabulary) -> int:
    """Position of an action atom in the universe, ordered by (predicate, subject, object)."""
    vocab.check(atom)
    x = vocab.n_entities
    return vocab.action_slot(atom.predicate) * x * x + atom.subject * x + atom.obj


def action_atom(index: int, vocab: Vocabulary) -> GroundAtom:
    """Inverse of `action_index`."""
    x = vocab.n_entities
    if not 0 <= index < action_universe_size(vocab):
        raise ContractError(f'action index {index} outside the universe of {action_universe_size(vocab)}')
    slot, rest = divmod(index, x * x)
    subject, obj = divmod(rest, x)
    return GroundAtom(len(vocab.state_predicates) + slot, subject, obj)
