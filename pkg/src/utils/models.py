from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class Domain(str, Enum):
    """Environment family."""

    BLOCKS = 'blocks'
    KEYDOOR = 'keydoor'


class Task(str, Enum):
    """Blocks World goal."""

    UNSTACK = 'UNSTACK'
    STACK = 'STACK'
    ON = 'ON'


class Variant(str, Enum):
    """Initial configuration of a Blocks World task."""

    TRAINING = 'training'
    SWAP_TOP_2 = 'swap_top_2'
    SWAP_RIGHT_2 = 'swap_right_2'
    SWAP_MIDDLE_2 = 'swap_middle_2'
    TWO_COLUMNS = 'two_columns'
    BLOCKS_5 = 'blocks_5'
    BLOCKS_6 = 'blocks_6'
    BLOCKS_7 = 'blocks_7'


class Algorithm(str, Enum):
    """Trainer used by `nsrl train`."""

    PPO = 'ppo'
    DQN = 'dqn'


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid', use_enum_values=False)


class EnvSection(_Section):
    """Which environment to build and how to seed it."""

    domain: Domain = Field(default=Domain.BLOCKS)
    task: Task = Field(default=Task.UNSTACK)
    variant: Variant = Field(default=Variant.TRAINING)
    piles: Optional[str] = Field(default=None, description='Bottom-first piles, e.g. ((a,b),(c,d))')
    goal: Optional[list[str]] = Field(default=None, min_length=2, max_length=2)
    relabel: bool = Field(default=True, description='Random order-preserving block choice while training')
    masking: bool = Field(default=False)
    horizon: Optional[int] = Field(default=None, gt=0)
    seed: int = Field(default=0, ge=0)
    eval_seed: int = Field(default=1, ge=0)
    success_probability: float = Field(default=1.0, ge=0.0, le=1.0)
    adjacency: Optional[list[list[str]]] = Field(default=None)
    extrinsic_in_training: bool = Field(default=False, description='Add the +100/+300 score to the training reward')


class ModelSection(_Section):
    """Attention stack and head sizes."""

    steps: int = Field(default=4, ge=1)
    layers: int = Field(default=2, ge=1)
    heads: int = Field(default=4, ge=1)
    hidden: int = Field(default=64, ge=1)
    head_hidden: int = Field(default=64, ge=1)
    critic_hidden: int = Field(default=20, ge=1)
    seed: int = Field(default=0, ge=0)


class TrainerSection(_Section):
    """Optimization hyperparameters for both trainers."""

    algorithm: Algorithm = Field(default=Algorithm.PPO)
    lr: float = Field(default=1e-4, gt=0.0)
    gamma: float = Field(default=1.0, gt=0.0, le=1.0)
    lam: float = Field(default=0.95, ge=0.0, le=1.0)
    clip: float = Field(default=0.2, gt=0.0)
    epochs: int = Field(default=4, ge=1)
    batch_episodes: int = Field(default=32, ge=1)
    episodes: int = Field(default=2000, ge=0)
    steps: int = Field(default=50000, ge=0)
    buffer_capacity: int = Field(default=100000, ge=1)
    batch_size: int = Field(default=64, ge=1)
    target_sync: int = Field(default=1000, ge=1)
    learning_starts: int = Field(default=1000, ge=0)
    train_every: int = Field(default=1, ge=1)
    epsilon_start: float = Field(default=1.0, ge=0.0, le=1.0)
    epsilon_end: float = Field(default=0.05, ge=0.0, le=1.0)
    epsilon_fraction: float = Field(default=0.4, gt=0.0, le=1.0)
    value_coef: float = Field(default=0.5, ge=0.0)
    entropy_coef: float = Field(default=0.01, ge=0.0)
    max_grad_norm: Optional[float] = Field(default=None, gt=0.0)
    checkpoint_every: int = Field(default=100, ge=1)
    log_every: int = Field(default=50, ge=1)
    seed: int = Field(default=0, ge=0)


class IoSection(_Section):
    """Output locations."""

    checkpoint: str = Field(default='runs/checkpoint.json')
    log: str = Field(default='runs/episodes.jsonl')


class RunConfig(_Section):
    """Complete configuration of one command invocation."""

    env: EnvSection = Field(default_factory=EnvSection)
    model: ModelSection = Field(default_factory=ModelSection)
    trainer: TrainerSection = Field(default_factory=TrainerSection)
    io: IoSection = Field(default_factory=IoSection)
