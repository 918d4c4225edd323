"""Symbolic abstraction of the first room of Montezuma's Revenge.

The agent (`man`) moves between six locations along `PathExist` edges, picks
up the key at `key_spot` and finishes by reaching the `door` while holding it.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from src.envs.base import Outcome, SymbolicEnv
from src.symbolic.vocabulary import GroundAtom, SymbolicState, Vocabulary
from src.utils.errors import ContractError


LOCATIONS = ('middle_ladder', 'door', 'left_of_skulls', 'lower_left_ladder', 'lower_right_ladder', 'key_spot')
MAN, KEY = 0, 1
AT_SPOT, WITH_OBJECT, WITHOUT_OBJECT, PATH_EXIST, KEY_TO_DOOR, MOVE = range(6)

KEYDOOR_VOCABULARY = Vocabulary(
    entities=('man', 'key') + LOCATIONS,
    state_predicates=('AtSpot', 'WithObject', 'WithoutObject', 'PathExist', 'KeyToDoor'),
    action_predicates=('Move',),
)

DEFAULT_ADJACENCY = [
    ['middle_ladder', 'left_of_skulls'],
    ['left_of_skulls', 'lower_left_ladder'],
    ['lower_left_ladder', 'lower_right_ladder'],
    ['lower_right_ladder', 'key_spot'],
    ['middle_ladder', 'door'],
]

Core = tuple[int, bool]


def _entity(name: str) -> int:
    return KEYDOOR_VOCABULARY.entity_id(name)


class KeyDoorConfig(BaseModel):
    """Path graph, rewards and option reliability of the KeyDoor room."""

    adjacency: list[list[str]] = Field(default_factory=lambda: [list(edge) for edge in DEFAULT_ADJACENCY])
    start: str = 'middle_ladder'
    step_penalty: float = -0.5
    key_reward: float = 100.0
    door_reward: float = 300.0
    success_probability: float = Field(default=1.0, ge=0.0, le=1.0)
    horizon: int = Field(default=20, gt=0)
    extrinsic_in_training: bool = False
    masking: bool = False

    @model_validator(mode='after')
    def _check_locations(self) -> KeyDoorConfig:
        for edge in self.adjacency:
            if len(edge) != 2 or edge[0] == edge[1]:
                raise ValueError(f'edge {edge} must join two distinct locations')
            unknown = set(edge) - set(LOCATIONS)
            if unknown:
                raise ValueError(f'unknown locations {sorted(unknown)} in adjacency')
        if self.start not in LOCATIONS:
            raise ValueError(f'start {self.start!r} is not a location')
        return self

    def edges(self) -> set[tuple[int, int]]:
        """Symmetric closure of the adjacency as entity-id pairs."""
        pairs = set()
        for a, b in self.adjacency:
            pairs.add((_entity(a), _entity(b)))
            pairs.add((_entity(b), _entity(a)))
        return pairs


class KeyDoor(SymbolicEnv):
    """Core state is (location entity id, holding key)."""

    def __init__(self, config: Optional[KeyDoorConfig] = None, seed: int = 0):
        super().__init__(seed)
        self.config = config or KeyDoorConfig()
        self.horizon = self.config.horizon
        self.masking = self.config.masking
        self._edges = self.config.edges()
        self._locations = [_entity(name) for name in LOCATIONS]

    @property
    def vocabulary(self) -> Vocabulary:
        return KEYDOOR_VOCABULARY

    def initial_core(self, rng: Optional[np.random.Generator] = None) -> Core:
        return _entity(self.config.start), False

    def enumeration_seeds(self) -> list[Core]:
        return [(loc, has_key) for loc in self._locations for has_key in (False, True)]

    def encode_core(self, core: Core) -> SymbolicState:
        location, has_key = core
        x = KEYDOOR_VOCABULARY.n_entities
        matrices = np.zeros((KEYDOOR_VOCABULARY.n_predicates, x, x))
        matrices[AT_SPOT, MAN, location] = 1.0
        matrices[WITH_OBJECT if has_key else WITHOUT_OBJECT, MAN, KEY] = 1.0
        for a, b in self._edges:
            matrices[PATH_EXIST, a, b] = 1.0
        matrices[KEY_TO_DOOR, KEY, _entity('door')] = 1.0
        return SymbolicState(matrices)

    def decode_state(self, state: SymbolicState) -> Core:
        location = int(np.argmax(state.matrices[AT_SPOT, MAN]))
        return location, bool(state.matrices[WITH_OBJECT, MAN, KEY] == 1.0)

    def core_action_atoms(self, core: Core) -> list[GroundAtom]:
        return [GroundAtom(MOVE, MAN, loc) for loc in self._locations]

    def is_valid(self, core: Core, action: GroundAtom) -> bool:
        return (core[0], action.obj) in self._edges

    def is_goal(self, core: Core) -> bool:
        return core[0] == _entity('door') and core[1]

    def _arrive(self, location: int, has_key: bool) -> tuple[Core, float, bool]:
        score, done = 0.0, False
        if location == _entity('key_spot') and not has_key:
            has_key, score = True, self.config.key_reward
        elif location == _entity('door') and has_key:
            score, done = self.config.door_reward, True
        return (location, has_key), score, done

    def _outcome(self, probability: float, core: Core, score: float, done: bool) -> Outcome:
        reward = self.config.step_penalty + (score if self.config.extrinsic_in_training else 0.0)
        return Outcome(probability, core, reward, score, done)

    def outcomes(self, core: Core, action: GroundAtom) -> list[Outcome]:
        """Result of `keydoor_step`; a failed option leaves the man where he is.

        Raises:
            ContractError: Unless the action is Move(man, location).
        """
        KEYDOOR_VOCABULARY.check(action)
        if action.predicate != MOVE or action.subject != MAN or action.obj not in self._locations:
            raise ContractError(f'{KEYDOOR_VOCABULARY.format_atom(action)} is not Move(man, location)')
        stay = self._outcome(1.0, core, 0.0, False)
        if not self.is_valid(core, action):
            return [stay]
        moved, score, done = self._arrive(action.obj, core[1])
        p = self.config.success_probability
        if p >= 1.0:
            return [self._outcome(1.0, moved, score, done)]
        if p <= 0.0:
            return [stay]
        return [self._outcome(p, moved, score, done), self._outcome(1.0 - p, core, 0.0, False)]


def keydoor_reset(config: Optional[KeyDoorConfig] = None) -> SymbolicState:
    env = KeyDoor(config)
    return env.encode_core(env.initial_core())


def keydoor_step(
    state: SymbolicState, action: GroundAtom, config: Optional[KeyDoorConfig] = None, rng: Optional[np.random.Generator] = None
) -> tuple[SymbolicState, float, bool]:
    """One meta decision from an arbitrary state; `rng` samples option failure."""
    env = KeyDoor(config)
    options = env.outcomes(env.decode_state(state), action)
    chosen = options[0]
    if len(options) > 1 and rng is not None and rng.random() >= options[0].probability:
        chosen = options[1]
    return env.encode_core(chosen.core), chosen.reward, chosen.done
