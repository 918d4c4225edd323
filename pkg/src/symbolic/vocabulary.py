"""Entities, predicates, grounded atoms and their predicate-matrix encoding."""
from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from src.utils.errors import DimensionError, VocabularyError


class Vocabulary(BaseModel):
    """Ordered entities plus state and action predicates.

    Every predicate is binary; predicates listed in `unary_predicates` are
    stored on the diagonal, P(x,x).
    """

    model_config = ConfigDict(frozen=True)

    entities: tuple[str, ...]
    state_predicates: tuple[str, ...]
    action_predicates: tuple[str, ...]
    unary_predicates: tuple[str, ...] = ()

    @model_validator(mode='after')
    def _check_names(self) -> Vocabulary:
        if len(set(self.entities)) != len(self.entities):
            raise ValueError(f'duplicate entity names in {self.entities}')
        names = self.predicates
        if not names:
            raise ValueError('a vocabulary needs at least one predicate')
        if len(set(names)) != len(names):
            raise ValueError(f'duplicate predicate names in {names}')
        unknown = set(self.unary_predicates) - set(names)
        if unknown:
            raise ValueError(f'unary predicates {sorted(unknown)} are not declared')
        return self

    @property
    def predicates(self) -> tuple[str, ...]:
        return self.state_predicates + self.action_predicates

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_predicates(self) -> int:
        return len(self.predicates)

    def entity_id(self, name: str) -> int:
        try:
            return self.entities.index(name)
        except ValueError:
            raise VocabularyError(f'unknown entity {name!r}') from None

    def predicate_id(self, name: str) -> int:
        try:
            return self.predicates.index(name)
        except ValueError:
            raise VocabularyError(f'unknown predicate {name!r}') from None

    def is_action(self, predicate: int) -> bool:
        return predicate >= len(self.state_predicates)

    def is_unary(self, predicate: str) -> bool:
        return predicate in self.unary_predicates

    def action_slot(self, predicate: int) -> int:
        """Position of an action predicate among the action predicates."""
        if not self.is_action(predicate):
            raise VocabularyError(f'{self.predicates[predicate]} is not an action predicate')
        return predicate - len(self.state_predicates)

    def atom(self, predicate: str, subject: str, obj: str) -> GroundAtom:
        return GroundAtom(self.predicate_id(predicate), self.entity_id(subject), self.entity_id(obj))

    def check(self, atom: GroundAtom) -> None:
        if not 0 <= atom.predicate < self.n_predicates:
            raise VocabularyError(f'predicate id {atom.predicate} out of range')
        for entity in (atom.subject, atom.obj):
            if not 0 <= entity < self.n_entities:
                raise VocabularyError(f'entity id {entity} out of range')

    def format_atom(self, atom: GroundAtom) -> str:
        self.check(atom)
        p, s, o = self.predicates[atom.predicate], self.entities[atom.subject], self.entities[atom.obj]
        return f'{p}({s},{o})'

    def parse_atom(self, text: str) -> GroundAtom:
        from src.symbolic.syntax import parse_atom

        predicate, subject, obj = parse_atom(text)
        return self.atom(predicate, subject, obj)


@dataclass(frozen=True, order=True, slots=True)
class GroundAtom:
    """Predicate applied to two constant entities, by vocabulary index."""

    predicate: int
    subject: int
    obj: int


class SymbolicState:
    """Binary predicate matrices, shape (N, |X|, |X|); M[k, i, j] = 1 iff P_k(x_i, x_j)."""

    __slots__ = ('matrices', '_key')

    def __init__(self, matrices: np.ndarray):
        arr = np.array(matrices, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise DimensionError(f'state matrices must be (N, X, X), got {arr.shape}')
        if not np.all((arr == 0.0) | (arr == 1.0)):
            raise DimensionError('state matrices must be binary')
        arr.flags.writeable = False
        self.matrices = arr
        self._key: Optional[bytes] = None

    @property
    def n_predicates(self) -> int:
        return self.matrices.shape[0]

    @property
    def n_entities(self) -> int:
        return self.matrices.shape[1]

    def holds(self, atom: GroundAtom) -> bool:
        return bool(self.matrices[atom.predicate, atom.subject, atom.obj] == 1.0)

    def key(self) -> bytes:
        if self._key is None:
            self._key = np.packbits(self.matrices.astype(np.uint8)).tobytes()
        return self._key

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SymbolicState) and np.array_equal(self.matrices, other.matrices)

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f'SymbolicState(N={self.n_predicates}, X={self.n_entities}, atoms={int(self.matrices.sum())})'


class FlatState:
    """Matrix M_f with one row per predicate, each the row-major flattening of M_k."""

    __slots__ = ('rows', 'n_entities')

    def __init__(self, rows: np.ndarray, n_entities: int):
        arr = np.array(rows, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != n_entities * n_entities:
            raise DimensionError(f'flat state must be (N, {n_entities ** 2}), got {arr.shape}')
        arr.flags.writeable = False
        self.rows = arr
        self.n_entities = n_entities

    def unflatten(self) -> SymbolicState:
        x = self.n_entities
        return SymbolicState(self.rows.reshape(-1, x, x))


def encode(atoms: Iterable[GroundAtom], vocab: Vocabulary) -> SymbolicState:
    """Set exactly the listed atoms to 1.

    Raises:
        VocabularyError: If an atom references an id outside the vocabulary.
    """
    x = vocab.n_entities
    matrices = np.zeros((vocab.n_predicates, x, x))
    for atom in atoms:
        vocab.check(atom)
        matrices[atom.predicate, atom.subject, atom.obj] = 1.0
    return SymbolicState(matrices)


def decode(state: SymbolicState) -> set[GroundAtom]:
    return {GroundAtom(int(k), int(i), int(j)) for k, i, j in np.argwhere(state.matrices == 1.0)}


def flatten(state: SymbolicState, vocab: Optional[Vocabulary] = None) -> FlatState:
    """Row-flatten every predicate matrix, zero-padding to the vocabulary capacity."""
    matrices = state.matrices
    if vocab is not None and state.n_entities < vocab.n_entities:
        x = vocab.n_entities
        padded = np.zeros((vocab.n_predicates, x, x))
        padded[: state.n_predicates, : state.n_entities, : state.n_entities] = matrices
        matrices = padded
    x = matrices.shape[1]
    return FlatState(matrices.reshape(matrices.shape[0], x * x), x)


def one_hot(entity: int, vocab: Vocabulary) -> np.ndarray:
    if not 0 <= entity < vocab.n_entities:
        raise VocabularyError(f'entity id {entity} out of range for {vocab.n_entities} entities')
    v = np.zeros(vocab.n_entities)
    v[entity] = 1.0
    return v


def stack_states(states: Iterable[SymbolicState]) -> np.ndarray:
    """Batch of predicate tensors, shape (B, N, X, X)."""
    return np.stack([s.matrices for s in states])
