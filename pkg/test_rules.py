import numpy as np
import pytest

from src.envs.blocks import BLOCKS_VOCABULARY
from src.envs.keydoor import KEYDOOR_VOCABULARY, keydoor_reset
from src.numerics.tensor import Tensor
from src.reasoning.kappa import AttentionWeights
from src.rules.extraction import (
    ChainRule,
    aggregate,
    chain_confidences,
    extract_rules,
    format_report,
    ground_rule,
    parse_report,
    parse_rule,
    render,
)
from src.utils.errors import ContractError, DimensionError, ParseError


def _soft(rng, steps=3, n=3):
    predicate = rng.random((steps, n)) + 0.05
    path = rng.random(steps) + 0.05
    return AttentionWeights(
        Tensor(predicate / predicate.sum(axis=-1, keepdims=True)), Tensor(path / path.sum())
    )


def test_one_hot_weights_give_a_single_certain_chain():
    ranked = chain_confidences(AttentionWeights.one_hot([0, 1], 3, 2))
    assert ranked[0] == ((0, 1), 1.0)
    assert all(conf == 0.0 for _, conf in ranked[1:])
    assert len(ranked) == 3 + 9


def test_confidences_of_all_chains_sum_to_one():
    for seed in range(100):
        ranked = chain_confidences(_soft(np.random.default_rng(seed)))
        assert len(ranked) == 3 + 9 + 27
        assert abs(sum(conf for _, conf in ranked) - 1.0) < 1e-9
    values = [conf for _, conf in ranked]
    assert values == sorted(values, reverse=True)


def test_beam_with_full_width_equals_exhaustive():
    weights = _soft(np.random.default_rng(1))
    exhaustive = chain_confidences(weights)
    beam = chain_confidences(weights, limit=0, beam=27)
    assert [c for c, _ in beam] == [c for c, _ in exhaustive]
    np.testing.assert_allclose([v for _, v in beam], [v for _, v in exhaustive])


def test_narrow_beam_keeps_the_best_chains():
    weights = _soft(np.random.default_rng(2))
    exhaustive = chain_confidences(weights)
    beam = chain_confidences(weights, limit=0, beam=2)
    assert len(beam) == 6
    assert beam[0] == exhaustive[0]


def test_batched_weights_are_rejected():
    rng = np.random.default_rng(3)
    batched = AttentionWeights(Tensor(np.full((2, 3, 3), 1 / 3)), Tensor(rng.dirichlet(np.ones(3), size=2)))
    with pytest.raises(ContractError):
        chain_confidences(batched)


def test_aggregate_averages_and_counts_missing_chains_as_zero():
    per_state = [[((0,), 0.75), ((1, 2), 0.25)], [((1, 2), 0.5)]]
    rules = aggregate(per_state, BLOCKS_VOCABULARY)
    assert rules[0].body == ('On',)
    assert rules[0].confidence == pytest.approx(0.375)
    assert rules[1].body == ('Top', 'GoalOn')
    assert rules[1].confidence == pytest.approx(0.375)
    assert all(r.head == 'Move' and r.support == 2 for r in rules)
    with pytest.raises(ContractError):
        aggregate([], BLOCKS_VOCABULARY)


def test_extract_rules_over_identical_states():
    weights = [AttentionWeights.one_hot([0, 0], 4, 2)] * 3
    rules = extract_rules(weights, BLOCKS_VOCABULARY)
    assert rules[0] == ChainRule(('On', 'On'), 'Move', 1.0, 3)


def test_render_and_parse_chain_clauses():
    rule = ChainRule(('On', 'On'), 'Move')
    assert render(rule) == 'Move(X,Z2) ← On(X,Z1) ∧ On(Z1,Z2)'
    unary = ChainRule(('On', 'Top'), 'Move')
    assert render(unary, ('Top',)) == 'Move(X,Z1) ← On(X,Z1) ∧ Top(Z1,Z1)'
    assert parse_rule(render(unary, ('Top',))) == unary
    assert parse_rule('Move(X,Z2) <- On(X,Z1) & On(Z1,Z2)') == rule
    with pytest.raises(ContractError):
        render(ChainRule((), 'Move'))


@pytest.mark.parametrize(
    'text',
    ['Move(X,Z1) ← On(Y,Z1)', 'Move(X,Z1) ← On(X,Z1) ∧ On(Z2,Z3)', 'Move(Y,Z1) ← On(X,Z1)', 'Move(X,Z1) ← '],
)
def test_parse_rule_rejects_non_chains(text):
    with pytest.raises(ParseError):
        parse_rule(text)


def test_report_text_round_trip():
    rules = [ChainRule(('GoalOn',), 'Move', 0.61234, 5), ChainRule(('On', 'Top'), 'Move', 0.2, 5)]
    report = format_report(rules, ('Top',), top_k=2)
    assert report.splitlines()[0] == '# 2 rules aggregated over 5 states'
    assert report.splitlines()[1] == '0.6123 Move(X,Z1) ← GoalOn(X,Z1)'
    parsed = parse_report(report)
    assert parsed == [ChainRule(('GoalOn',), 'Move', 0.6123, 5), ChainRule(('On', 'Top'), 'Move', 0.2, 5)]


def test_bad_report_line_names_its_line():
    with pytest.raises(ParseError) as info:
        parse_report('# 1 rules aggregated over 1 states\n0.5000 Move(X,Z1) ← On(X,Z1)\nnot a rule\n')
    assert info.value.line == 3


def test_debug_one_hot_report():
    ranked = aggregate([chain_confidences(AttentionWeights.one_hot([0, 1], 4, 4))], BLOCKS_VOCABULARY)
    report = format_report(ranked, BLOCKS_VOCABULARY.unary_predicates, top_k=1)
    assert report.splitlines()[1] == '1.0000 Move(X,Z1) ← On(X,Z1) ∧ Top(Z1,Z1)'


def test_ground_rule_on_keydoor_start():
    state = keydoor_reset()
    rule = ChainRule(('AtSpot', 'PathExist'), 'Move', 1.0, 1)
    grounded = ground_rule(rule, state, KEYDOOR_VOCABULARY)
    assert grounded == 'Move(man,door) ← AtSpot(man,middle_ladder) ∧ PathExist(middle_ladder,door)'
    assert ground_rule(ChainRule(('KeyToDoor', 'KeyToDoor'), 'Move'), state, KEYDOOR_VOCABULARY) is None


def test_ground_rule_takes_the_linked_pair_with_the_highest_score():
    state = keydoor_reset()
    rule = ChainRule(('AtSpot', 'PathExist'), 'Move', 1.0, 1)
    vocab = KEYDOOR_VOCABULARY
    scores = np.zeros((vocab.n_entities, vocab.n_entities))
    scores[vocab.entity_id('man'), vocab.entity_id('left_of_skulls')] = 0.7
    scores[vocab.entity_id('man'), vocab.entity_id('door')] = 0.2
    # unlinked by the rule body, never chosen
    scores[vocab.entity_id('key'), vocab.entity_id('door')] = 5.0
    grounded = ground_rule(rule, state, vocab, scores)
    assert grounded == (
        'Move(man,left_of_skulls) ← AtSpot(man,middle_ladder) ∧ PathExist(middle_ladder,left_of_skulls)'
    )
    with pytest.raises(DimensionError):
        ground_rule(rule, state, vocab, np.zeros((2, 2)))
