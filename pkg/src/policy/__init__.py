"""Q heads, action selection and the Double-Q and PPO trainers."""
from src.policy.acting import ActMode, act, action_probabilities, network_chooser, select_index
from src.policy.dqn import (
    DqnHyper,
    DqnState,
    EpsilonSchedule,
    ReplayBuffer,
    double_q_targets,
    dqn_train,
    q_loss,
    td_loss,
)
from src.policy.network import NetworkSpec, PolicyNetwork, q_values
from src.policy.ppo import (
    PpoBatch,
    PpoHyper,
    PpoState,
    Trajectory,
    clipped_surrogate,
    collect_trajectory,
    gae,
    normalize_advantages,
    ppo_loss,
    ppo_train,
    ppo_update,
)
from src.policy.rollout import EpisodeStats, Transition, evaluate_policy, run_episode, summarize


__all__ = [
    'ActMode',
    'DqnHyper',
    'DqnState',
    'EpisodeStats',
    'EpsilonSchedule',
    'NetworkSpec',
    'PolicyNetwork',
    'PpoBatch',
    'PpoHyper',
    'PpoState',
    'ReplayBuffer',
    'Trajectory',
    'Transition',
    'act',
    'action_probabilities',
    'clipped_surrogate',
    'collect_trajectory',
    'double_q_targets',
    'dqn_train',
    'evaluate_policy',
    'gae',
    'network_chooser',
    'normalize_advantages',
    'ppo_loss',
    'ppo_train',
    'ppo_update',
    'q_loss',
    'q_values',
    'run_episode',
    'select_index',
    'summarize',
    'td_loss',
]
