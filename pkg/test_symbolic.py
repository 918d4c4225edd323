import numpy as np
import pytest
from pydantic import ValidationError

from src.symbolic.syntax import format_piles, parse_atom, parse_clause, parse_piles, parse_report_line
from src.symbolic.vocabulary import (
    GroundAtom,
    SymbolicState,
    Vocabulary,
    decode,
    encode,
    flatten,
    one_hot,
    stack_states,
)
from src.utils.errors import DimensionError, ParseError, VocabularyError


VOCAB = Vocabulary(
    entities=('a', 'b', 'c', 'floor'),
    state_predicates=('On', 'Top'),
    action_predicates=('Move',),
    unary_predicates=('Top',),
)


def test_vocabulary_lookups():
    assert VOCAB.n_entities == 4
    assert VOCAB.predicates == ('On', 'Top', 'Move')
    assert VOCAB.predicate_id('Move') == 2
    assert VOCAB.is_action(2) and not VOCAB.is_action(0)
    assert VOCAB.action_slot(2) == 0
    assert VOCAB.is_unary('Top')
    with pytest.raises(VocabularyError):
        VOCAB.entity_id('z')
    with pytest.raises(VocabularyError):
        VOCAB.action_slot(0)


def test_vocabulary_rejects_duplicates():
    with pytest.raises(ValidationError):
        Vocabulary(entities=('a', 'a'), state_predicates=('On',), action_predicates=())


def test_encode_sets_exactly_the_listed_atoms():
    atoms = {VOCAB.atom('On', 'a', 'floor'), VOCAB.atom('On', 'b', 'a'), VOCAB.atom('Top', 'b', 'b')}
    state = encode(atoms, VOCAB)
    assert state.matrices.shape == (3, 4, 4)
    assert state.matrices.sum() == 3
    assert state.holds(VOCAB.atom('On', 'b', 'a'))
    assert not state.holds(VOCAB.atom('On', 'a', 'b'))
    assert decode(state) == atoms


def test_encode_rejects_out_of_range_ids():
    with pytest.raises(VocabularyError):
        encode([GroundAtom(0, 0, 9)], VOCAB)
    with pytest.raises(VocabularyError):
        encode([GroundAtom(5, 0, 0)], VOCAB)


def test_state_is_binary_and_read_only():
    with pytest.raises(DimensionError):
        SymbolicState(np.full((1, 2, 2), 0.5))
    with pytest.raises(DimensionError):
        SymbolicState(np.zeros((2, 3)))
    state = encode([], VOCAB)
    with pytest.raises(ValueError):
        state.matrices[0, 0, 0] = 1.0


def test_equal_states_hash_equal():
    first = encode([VOCAB.atom('On', 'a', 'floor')], VOCAB)
    second = encode([VOCAB.atom('On', 'a', 'floor')], VOCAB)
    assert first == second
    assert len({first, second}) == 1
    assert first != encode([], VOCAB)


def test_flatten_is_row_major_per_predicate():
    state = encode([VOCAB.atom('On', 'b', 'c')], VOCAB)
    flat = flatten(state)
    assert flat.rows.shape == (3, 16)
    assert flat.rows[0, 1 * 4 + 2] == 1.0
    assert flat.unflatten() == state


def test_flatten_pads_to_vocabulary_capacity():
    small = SymbolicState(np.ones((3, 2, 2)))
    flat = flatten(small, VOCAB)
    assert flat.rows.shape == (3, 16)
    assert flat.rows.sum() == 12
    assert flat.rows[0, 2] == 0.0


def test_one_hot_and_stack():
    np.testing.assert_array_equal(one_hot(2, VOCAB), [0.0, 0.0, 1.0, 0.0])
    with pytest.raises(VocabularyError):
        one_hot(4, VOCAB)
    batch = stack_states([encode([], VOCAB), encode([VOCAB.atom('Top', 'a', 'a')], VOCAB)])
    assert batch.shape == (2, 3, 4, 4)


def test_atom_text():
    atom = VOCAB.parse_atom('On(b, a)')
    assert atom == VOCAB.atom('On', 'b', 'a')
    assert VOCAB.format_atom(atom) == 'On(b,a)'
    assert parse_atom('GoalOn(a,b)') == ('GoalOn', 'a', 'b')
    with pytest.raises(ParseError):
        parse_atom('On(a)')


def test_piles_text():
    assert parse_piles('((a,b,c),(d))') == [['a', 'b', 'c'], ['d']]
    assert parse_piles(' ( (a) , (b) ) ') == [['a'], ['b']]
    assert format_piles([['a', 'b'], ['c', 'd']]) == '((a,b),(c,d))'
    with pytest.raises(ParseError):
        parse_piles('(a,b)')


def test_clause_text_accepts_both_glyph_sets():
    unicode = parse_clause('Move(X,Z2) ← On(X,Z1) ∧ On(Z1,Z2)')
    ascii_ = parse_clause('Move(X,Z2) <- On(X,Z1) & On(Z1,Z2)')
    assert unicode == ascii_
    assert unicode.head == ('Move', 'X', 'Z2')
    assert unicode.body == (('On', 'X', 'Z1'), ('On', 'Z1', 'Z2'))
    confidence, clause = parse_report_line('0.2500 Move(X,Z1) ← GoalOn(X,Z1)')
    assert confidence == 0.25
    assert clause.body == (('GoalOn', 'X', 'Z1'),)
