"""Multi-hop reasoning over predicate matrices."""
from src.reasoning.kappa import AttentionWeights, hop, kappa, mix_step, score


__all__ = ['AttentionWeights', 'hop', 'kappa', 'mix_step', 'score']
