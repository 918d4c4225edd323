"""Chain rules read off attention weights, and their clause text.

A chain (P_1, ..., P_n) with head Act has confidence
s_path[n] * prod_t s_pred[t, P_t] for one state; confidences are averaged over
a sample of states.
"""
from __future__ import annotations

import itertools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.reasoning.kappa import AttentionWeights
from src.symbolic.syntax import ParsedClause, format_atom, parse_clause, parse_report_line
from src.symbolic.vocabulary import SymbolicState, Vocabulary
from src.utils.errors import ContractError, DimensionError, ParseError


EXHAUSTIVE_LIMIT = 100_000
BEAM_WIDTH = 256

Chain = tuple[int, ...]


@dataclass(frozen=True)
class ChainRule:
    """Body predicate names in hop order, the action head, mean confidence and state count."""

    body: tuple[str, ...]
    head: str
    confidence: float = 0.0
    support: int = 0


def _ranked(pairs: Iterable[tuple[Chain, float]]) -> list[tuple[Chain, float]]:
    return sorted(pairs, key=lambda p: (-p[1], len(p[0]), p[0]))


def _single(weights: AttentionWeights) -> tuple[np.ndarray, np.ndarray]:
    predicate, path = weights.numpy()
    if predicate.ndim != 2 or path.ndim != 1:
        raise ContractError(f'expected weights of one state, got shapes {predicate.shape} and {path.shape}')
    return predicate, path


def chain_confidences(
    weights: AttentionWeights,
    limit: int = EXHAUSTIVE_LIMIT,
    beam: int = BEAM_WIDTH,
) -> list[tuple[Chain, float]]:
    """Confidence of every chain of length 1..T, best first.

    Exhaustive when N + N^2 + ... + N^T <= `limit`, otherwise a beam of width
    `beam` over prefixes of each length.
    """
    predicate, path = _single(weights)
    steps, n = predicate.shape
    if sum(n**length for length in range(1, steps + 1)) <= limit:
        out = []
        products = np.ones(())
        for length in range(1, steps + 1):
            products = products[..., None] * predicate[length - 1]
            scaled = path[length - 1] * products.reshape(-1)
            chains = itertools.product(range(n), repeat=length)
            out.extend(zip(chains, scaled.tolist()))
        return _ranked(out)
    out = []
    prefixes: list[tuple[Chain, float]] = [((), 1.0)]
    for length in range(1, steps + 1):
        grown = [(c + (k,), p * float(predicate[length - 1, k])) for c, p in prefixes for k in range(n)]
        prefixes = _ranked(grown)[:beam]
        out.extend((c, p * float(path[length - 1])) for c, p in prefixes)
    return _ranked(out)


def aggregate(
    per_state: Sequence[Sequence[tuple[Chain, float]]],
    vocab: Vocabulary,
    head: Optional[str] = None,
) -> list[ChainRule]:
    """Mean confidence of each chain over the states; a chain missing from a state counts 0.

    Raises:
        ContractError: If no state is given.
    """
    if not per_state:
        raise ContractError('aggregate needs at least one state')
    head = head or vocab.action_predicates[0]
    totals: dict[Chain, float] = {}
    for confidences in per_state:
        for chain, value in confidences:
            totals[chain] = totals.get(chain, 0.0) + value
    support = len(per_state)
    ranked = _ranked((chain, total / support) for chain, total in totals.items())
    names = vocab.predicates
    return [ChainRule(tuple(names[k] for k in chain), head, value, support) for chain, value in ranked]


def extract_rules(
    weights: Iterable[AttentionWeights],
    vocab: Vocabulary,
    head: Optional[str] = None,
) -> list[ChainRule]:
    """`chain_confidences` per state followed by `aggregate`."""
    return aggregate([chain_confidences(w) for w in weights], vocab, head)


def _variables(body: Sequence[str], unary: Sequence[str]) -> list[tuple[str, str]]:
    current, fresh = 'X', 0
    pairs = []
    for name in body:
        if name in unary:
            pairs.append((current, current))
            continue
        fresh += 1
        pairs.append((current, f'Z{fresh}'))
        current = f'Z{fresh}'
    return pairs


def render(rule: ChainRule, unary: Sequence[str] = ()) -> str:
    """Clause text such as `Move(X,Z2) ← On(X,Z1) ∧ On(Z1,Z2)`.

    Predicates in `unary` repeat their variable, e.g. `Top(X,X)`.
    """
    if not rule.body:
        raise ContractError('a rule needs a non-empty body')
    pairs = _variables(rule.body, unary)
    body = ' ∧ '.join(format_atom(name, a, b) for name, (a, b) in zip(rule.body, pairs))
    return f'{format_atom(rule.head, "X", pairs[-1][1])} ← {body}'


def _from_clause(clause: ParsedClause, confidence: float = 0.0, support: int = 0) -> ChainRule:
    body = tuple(atom[0] for atom in clause.body)
    unary = [atom[0] for atom in clause.body if atom[1] == atom[2]]
    expected = _variables(body, unary)
    found = [(atom[1], atom[2]) for atom in clause.body]
    if found != expected:
        raise ParseError(f'body variables {found} do not form a chain from X')
    head, first, last = clause.head
    if first != 'X' or last != expected[-1][1]:
        raise ParseError(f'head {head}({first},{last}) does not join X to the chain end {expected[-1][1]}')
    return ChainRule(body, head, confidence, support)


def parse_rule(text: str) -> ChainRule:
    """Inverse of `render`; accepts `←`/`∧` and ASCII `<-`/`&`.

    Raises:
        ParseError: If the text is not a chain clause.
    """
    return _from_clause(parse_clause(text))


def format_report(rules: Sequence[ChainRule], unary: Sequence[str] = (), top_k: Optional[int] = None) -> str:
    """Header with the support count, then `confidence clause` lines."""
    shown = list(rules if top_k is None else rules[:top_k])
    support = shown[0].support if shown else 0
    lines = [f'# {len(shown)} rules aggregated over {support} states']
    lines += [f'{rule.confidence:.4f} {render(rule, unary)}' for rule in shown]
    return '\n'.join(lines) + '\n'


def parse_report(text: str) -> list[ChainRule]:
    """Rules of a report written by `format_report`; confidences are the printed 4-decimal values.

    Raises:
        ParseError: With the 1-based line number of the first bad line.
    """
    rules = []
    support = 0
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith('#'):
            words = line.split()
            support = int(words[-2]) if len(words) >= 2 and words[-2].isdigit() else 0
            continue
        try:
            confidence, clause = parse_report_line(line)
            rules.append(_from_clause(clause, confidence, support))
        except ParseError as exc:
            raise ParseError(str(exc), line=number) from None
    return rules


def ground_rule(
    rule: ChainRule, state: SymbolicState, vocab: Vocabulary, scores: Optional[np.ndarray] = None
) -> Optional[str]:
    """Bind the rule's variables to entities of `state`.

    X and the head's object are the pair the rule body links with the largest
    entry of `scores` (usually the network's kappa on `state`), or of the
    body's own chain product when `scores` is None. Ties go to the first pair in
    row-major order. The intermediate variables follow the first path through
    the state's atoms. Returns None when no pair is linked.
    """
    unary = set(vocab.unary_predicates)
    ids = [vocab.predicate_id(name) for name in rule.body]
    product = np.eye(vocab.n_entities)
    for k in ids:
        product = product @ state.matrices[k]
    if not product.any():
        return None
    if scores is not None:
        if scores.shape != product.shape:
            raise DimensionError(f'scores shape {scores.shape} != {product.shape}')
        product = np.where(product > 0, scores, -np.inf)
    x, target = np.unravel_index(int(np.argmax(product)), product.shape)

    def walk(position: int, entity: int) -> Optional[list[int]]:
        if position == len(ids):
            return [] if entity == target else None
        name = rule.body[position]
        candidates = [entity] if name in unary else range(vocab.n_entities)
        for nxt in candidates:
            if state.matrices[ids[position], entity, nxt] == 1.0:
                rest = walk(position + 1, int(nxt))
                if rest is not None:
                    return [int(nxt)] + rest
        return None

    path = walk(0, int(x))
    entities = vocab.entities
    atoms, current = [], int(x)
    for name, nxt in zip(rule.body, path):
        atoms.append(format_atom(name, entities[current], entities[nxt]))
        current = nxt
    return f'{format_atom(rule.head, entities[int(x)], entities[int(target)])} ← {" ∧ ".join(atoms)}'
