"""Symbolic environments and the value-iteration oracle."""
from src.envs.base import Outcome, StepResult, SymbolicEnv, action_atom, action_index, action_universe_size
from src.envs.blocks import BLOCKS_VOCABULARY, BlocksConfig, BlocksWorld, blocks_reset, blocks_step
from src.envs.keydoor import KEYDOOR_VOCABULARY, KeyDoor, KeyDoorConfig, keydoor_reset, keydoor_step
from src.envs.mdp import EnumeratedMdp, ScriptedPolicy, ValueResult, enumerate_mdp, optimal_return, value_iteration
from src.envs.variants import VARIANT_PILES, task_variants, variant_config


__all__ = [
    'BLOCKS_VOCABULARY',
    'BlocksConfig',
    'BlocksWorld',
    'EnumeratedMdp',
    'KEYDOOR_VOCABULARY',
    'KeyDoor',
    'KeyDoorConfig',
    'Outcome',
    'ScriptedPolicy',
    'StepResult',
    'SymbolicEnv',
    'VARIANT_PILES',
    'ValueResult',
    'action_atom',
    'action_index',
    'action_universe_size',
    'blocks_reset',
    'blocks_step',
    'enumerate_mdp',
    'keydoor_reset',
    'keydoor_step',
    'optimal_return',
    'task_variants',
    'value_iteration',
    'variant_config',
]
