"""JSON checkpoints: parameters, optimizer moments, counters, config echo and rng state."""
from __future__ import annotations

import os
import tempfile
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, ValidationError

from src.symbolic.vocabulary import Vocabulary
from src.utils.errors import IncompatibleCheckpointError


FORMAT_VERSION = 1


class TensorRecord(BaseModel):
    """Row-major values of one named array."""

    name: str
    shape: list[int]
    values: list[float]

    @classmethod
    def from_array(cls, name: str, array: np.ndarray) -> TensorRecord:
        return cls(name=name, shape=list(array.shape), values=[float(v) for v in np.ravel(array)])

    def array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64).reshape(self.shape)


class OptimizerRecord(BaseModel):
    t: int = 0
    m: list[TensorRecord] = Field(default_factory=list)
    v: list[TensorRecord] = Field(default_factory=list)


class TrainerRecord(BaseModel):
    step: int = 0
    episode: int = 0
    epsilon: Optional[float] = None
    optimizer: Optional[OptimizerRecord] = None


class Checkpoint(BaseModel):
    format_version: int = FORMAT_VERSION
    vocabulary: Vocabulary
    parameters: list[TensorRecord]
    trainer: TrainerRecord = Field(default_factory=TrainerRecord)
    config: dict[str, Any] = Field(default_factory=dict)
    rng_state: dict[str, Any] = Field(default_factory=dict)

    def arrays(self) -> dict[str, np.ndarray]:
        return {record.name: record.array() for record in self.parameters}


def records(arrays: Mapping[str, np.ndarray]) -> list[TensorRecord]:
    return [TensorRecord.from_array(name, value) for name, value in arrays.items()]


def to_json(checkpoint: Checkpoint) -> str:
    return checkpoint.model_dump_json(indent=1) + '\n'


def save_checkpoint(path: str | Path, checkpoint: Checkpoint) -> Path:
    """Write atomically: a temporary file in the same directory replaces `path`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f'.{path.name}.', dir=path.parent)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8') as handle:
            handle.write(to_json(checkpoint))
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    logger.debug(f'💾 checkpoint written to {path}')
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read and version-check a checkpoint.

    Raises:
        IncompatibleCheckpointError: If the file is missing, malformed or of another format version.
    """
    path = Path(path)
    if not path.is_file():
        raise IncompatibleCheckpointError(f'checkpoint {path} not found')
    try:
        checkpoint = Checkpoint.model_validate_json(path.read_text(encoding='utf-8'))
    except ValidationError as exc:
        raise IncompatibleCheckpointError(f'{path}: not a checkpoint ({exc.errors()[0]["msg"]})') from None
    if checkpoint.format_version != FORMAT_VERSION:
        raise IncompatibleCheckpointError(
            f'{path}: format version {checkpoint.format_version}, expected {FORMAT_VERSION}'
        )
    return checkpoint


def check_vocabulary(checkpoint: Checkpoint, vocab: Vocabulary) -> None:
    """Raise unless the checkpoint was trained on the same entities and predicates."""
    if checkpoint.vocabulary != vocab:
        raise IncompatibleCheckpointError(
            f'checkpoint vocabulary {checkpoint.vocabulary.predicates} over {checkpoint.vocabulary.entities} '
            f'does not match {vocab.predicates} over {vocab.entities}'
        )


def rng_record(rng: np.random.Generator) -> dict[str, Any]:
    """Generator state with the 128-bit PCG64 words stored as decimal strings."""
    state = rng.bit_generator.state
    return {
        'bit_generator': state['bit_generator'],
        'state': str(state['state']['state']),
        'inc': str(state['state']['inc']),
        'has_uint32': int(state['has_uint32']),
        'uinteger': int(state['uinteger']),
    }


def restore_rng(record: Mapping[str, Any]) -> np.random.Generator:
    if record.get('bit_generator', 'PCG64') != 'PCG64':
        raise IncompatibleCheckpointError(f'unsupported bit generator {record["bit_generator"]}')
    rng = np.random.default_rng()
    if record:
        rng.bit_generator.state = {
            'bit_generator': 'PCG64',
            'state': {'state': int(record['state']), 'inc': int(record['inc'])},
            'has_uint32': int(record['has_uint32']),
            'uinteger': int(record['uinteger']),
        }
    return rng
