"""First-order vocabulary and the predicate-matrix state encoding."""
from src.symbolic.vocabulary import (
    FlatState,
    GroundAtom,
    SymbolicState,
    Vocabulary,
    decode,
    encode,
    flatten,
    one_hot,
    stack_states,
)


__all__ = [
    'FlatState',
    'GroundAtom',
    'SymbolicState',
    'Vocabulary',
    'decode',
    'encode',
    'flatten',
    'one_hot',
    'stack_states',
]
