"""Hierarchical attention over predicates and chain lengths."""
from src.attention.modules import (
    AttentionModule,
    PathAttentionHead,
    PredicateAttentionStack,
    path_attention,
    predicate_attention,
)


__all__ = [
    'AttentionModule',
    'PathAttentionHead',
    'PredicateAttentionStack',
    'path_attention',
    'predicate_attention',
]
