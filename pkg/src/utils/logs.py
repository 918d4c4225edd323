"""Console logging setup and the JSON-lines episode log."""
from __future__ import annotations

import sys
from pathlib import Path
from typing import Literal, Optional

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.utils.errors import ContractError, ParseError


def setup_logging(verbose: bool = False) -> None:
    """Single stderr sink; DEBUG when `verbose`."""
    logger.remove()
    logger.add(
        sys.stderr,
        level='DEBUG' if verbose else 'INFO',
        format='<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {message}',
    )


class RuleRecord(BaseModel):
    clause: str
    confidence: float


class EpisodeLogRecord(BaseModel):
    """One line of an episode log."""

    model_config = ConfigDict(populate_by_name=True, extra='forbid')

    kind: Literal['train', 'eval', 'summary', 'rules'] = 'train'
    episode: int = Field(default=0, ge=0)
    total_steps: int = Field(default=0, ge=0)
    return_: float = Field(default=0.0, alias='return')
    length: int = Field(default=0, ge=0)
    task: str = ''
    variant: str = ''
    seed: int = 0
    atoms: Optional[list[list[str]]] = None
    rules: Optional[list[RuleRecord]] = None
    mean: Optional[float] = None
    std: Optional[float] = None
    episodes: Optional[int] = None

    def to_line(self) -> str:
        return self.model_dump_json(by_alias=True, exclude_none=True)


class EpisodeLogWriter:
    """Append-only writer; each record is flushed as soon as it is written.

    Episode indices must not decrease within a kind.
    """

    def __init__(self, path: str | Path, append: bool = False):
        self.path = Path(path)
        self.append = append
        self._handle = None
        self._last: dict[str, int] = {}

    def __enter__(self) -> EpisodeLogWriter:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = self.path.open('a' if self.append else 'w', encoding='utf-8')
        return self

    def __exit__(self, *exc) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def write(self, record: EpisodeLogRecord) -> None:
        if self._handle is None:
            raise ContractError('episode log writer is not open')
        last = self._last.get(record.kind)
        if last is not None and record.episode < last:
            raise ContractError(f'{record.kind} episode {record.episode} follows episode {last}')
        self._last[record.kind] = record.episode
        self._handle.write(record.to_line() + '\n')
        self._handle.flush()


def read_episode_log(path: str | Path) -> list[EpisodeLogRecord]:
    """Parse every non-blank line.

    Raises:
        ParseError: Naming the file and 1-based line of the first bad record.
    """
    records = []
    path = Path(path)
    with path.open(encoding='utf-8') as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                records.append(EpisodeLogRecord.model_validate_json(line))
            except ValidationError as exc:
                raise ParseError(f'bad episode record: {exc.errors()[0]["msg"]}', line=number, path=str(path)) from None
    return records
