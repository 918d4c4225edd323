"""Build environments, networks, optimizers and checkpoints from a `RunConfig`."""
from __future__ import annotations

from typing import Optional

import numpy as np
from pydantic import ValidationError

from src.envs.base import SymbolicEnv
from src.envs.blocks import BlocksConfig, BlocksWorld
from src.envs.keydoor import KeyDoor, KeyDoorConfig
from src.envs.variants import variant_config
from src.numerics.optim import Adam
from src.policy.dqn import DqnHyper, EpsilonSchedule
from src.policy.network import NetworkSpec, PolicyNetwork
from src.policy.ppo import PpoHyper
from src.symbolic.syntax import parse_piles
from src.utils.checkpoint import (
    Checkpoint,
    OptimizerRecord,
    TrainerRecord,
    check_vocabulary,
    records,
    restore_rng,
    rng_record,
)
from src.utils.errors import ConfigError
from src.utils.models import Algorithm, Domain, EnvSection, RunConfig, Variant


def blocks_config(section: EnvSection, training: bool) -> BlocksConfig:
    """Variant piles (or the explicit `piles` override) with relabeling only while training."""
    extra = {
        'relabel': training and section.relabel and section.variant is Variant.TRAINING,
        'masking': section.masking,
    }
    if section.horizon is not None:
        extra['horizon'] = section.horizon
    if section.goal is not None:
        extra['goal'] = tuple(section.goal)
    try:
        if section.piles is not None:
            return BlocksConfig(task=section.task, piles=parse_piles(section.piles), **extra)
        return variant_config(section.task, section.variant, **extra)
    except ValidationError as exc:
        raise ConfigError(f'env: {exc.errors()[0]["msg"]}') from None


def keydoor_config(section: EnvSection) -> KeyDoorConfig:
    extra = {
        'success_probability': section.success_probability,
        'extrinsic_in_training': section.extrinsic_in_training,
        'masking': section.masking,
    }
    if section.horizon is not None:
        extra['horizon'] = section.horizon
    if section.adjacency is not None:
        extra['adjacency'] = section.adjacency
    try:
        return KeyDoorConfig(**extra)
    except ValidationError as exc:
        raise ConfigError(f'env: {exc.errors()[0]["msg"]}') from None


def build_env(config: RunConfig, training: bool = True, seed: Optional[int] = None) -> SymbolicEnv:
    section = config.env
    seed = (section.seed if training else section.eval_seed) if seed is None else seed
    if section.domain is Domain.KEYDOOR:
        return KeyDoor(keydoor_config(section), seed)
    return BlocksWorld(blocks_config(section, training), seed)


def network_spec(config: RunConfig) -> NetworkSpec:
    model = config.model
    return NetworkSpec(
        steps=model.steps,
        layers=model.layers,
        heads=model.heads,
        hidden=model.hidden,
        head_hidden=model.head_hidden,
        critic_hidden=model.critic_hidden,
        critic=config.trainer.algorithm is Algorithm.PPO,
        seed=model.seed,
    )


def build_network(config: RunConfig, env: SymbolicEnv) -> PolicyNetwork:
    return PolicyNetwork(env.vocabulary, network_spec(config))


def build_optimizer(config: RunConfig, network: PolicyNetwork) -> Adam:
    return Adam(network.params, lr=config.trainer.lr, max_grad_norm=config.trainer.max_grad_norm)


def ppo_hyper(config: RunConfig) -> PpoHyper:
    t = config.trainer
    return PpoHyper(
        episodes=t.episodes,
        batch_episodes=t.batch_episodes,
        clip=t.clip,
        epochs=t.epochs,
        gamma=t.gamma,
        lam=t.lam,
        value_coef=t.value_coef,
        entropy_coef=t.entropy_coef,
        log_every=t.log_every,
    )


def dqn_hyper(config: RunConfig) -> DqnHyper:
    t = config.trainer
    return DqnHyper(
        steps=t.steps,
        gamma=t.gamma,
        batch_size=t.batch_size,
        buffer_capacity=t.buffer_capacity,
        target_sync=t.target_sync,
        learning_starts=t.learning_starts,
        train_every=t.train_every,
        epsilon=EpsilonSchedule(t.epsilon_start, t.epsilon_end, t.epsilon_fraction, t.steps),
        log_every=t.log_every,
        seed=t.seed,
    )


def make_checkpoint(
    config: RunConfig,
    network: PolicyNetwork,
    optimizer: Optional[Adam],
    rng: np.random.Generator,
    step: int = 0,
    episode: int = 0,
    epsilon: Optional[float] = None,
) -> Checkpoint:
    optimizer_record = None
    if optimizer is not None:
        optimizer_record = OptimizerRecord(t=optimizer.t, m=records(optimizer.m), v=records(optimizer.v))
    return Checkpoint(
        vocabulary=network.vocab,
        parameters=records(network.params.arrays()),
        trainer=TrainerRecord(step=step, episode=episode, epsilon=epsilon, optimizer=optimizer_record),
        config=config.model_dump(mode='json'),
        rng_state=rng_record(rng),
    )


def restore_network(checkpoint: Checkpoint, env: SymbolicEnv) -> tuple[PolicyNetwork, RunConfig]:
    """Rebuild the checkpoint's network for `env`.

    Raises:
        IncompatibleCheckpointError: If the vocabularies differ.
    """
    check_vocabulary(checkpoint, env.vocabulary)
    saved = RunConfig.model_validate(checkpoint.config)
    network = PolicyNetwork(env.vocabulary, network_spec(saved))
    network.params.load_arrays(checkpoint.arrays())
    return network, saved


def resume_training(
    checkpoint: Checkpoint, config: RunConfig, env: SymbolicEnv
) -> tuple[PolicyNetwork, Adam, np.random.Generator, TrainerRecord]:
    """Network, optimizer moments, rng stream and counters of an interrupted run.

    Raises:
        IncompatibleCheckpointError: If the vocabularies differ.
    """
    network, _ = restore_network(checkpoint, env)
    optimizer = build_optimizer(config, network)
    saved = checkpoint.trainer.optimizer
    if saved is not None:
        optimizer.load_state(
            saved.t, {r.name: r.array() for r in saved.m}, {r.name: r.array() for r in saved.v}
        )
    return network, optimizer, restore_rng(checkpoint.rng_state), checkpoint.trainer
