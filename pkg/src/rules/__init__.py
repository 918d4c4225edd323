"""Chain-rule extraction from attention weights."""
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


__all__ = [
    'ChainRule',
    'aggregate',
    'chain_confidences',
    'extract_rules',
    'format_report',
    'ground_rule',
    'parse_report',
    'parse_rule',
    'render',
]
