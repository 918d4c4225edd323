"""TOML run configuration with `--section.key=value` overrides."""
from __future__ import annotations

import os
import re
import tomllib
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Optional

from dotenv import load_dotenv
from loguru import logger
from pydantic import ValidationError

from src.utils.errors import ConfigError
from src.utils.models import RunConfig


CONFIG_DIR_ENV = 'NSRL_CONFIG_DIR'

_TABLE = re.compile(r'^\s*\[\s*([A-Za-z0-9_.]+)\s*\]')
_KEY = re.compile(r'^\s*([A-Za-z0-9_.]+)\s*=')
_TOML_LINE = re.compile(r'line (\d+)')


def resolve_config_path(path: str | Path) -> Path:
    """Find a config file, falling back to `$NSRL_CONFIG_DIR` for relative paths.

    Raises:
        ConfigError: If the file does not exist in either place.
    """
    load_dotenv()
    candidate = Path(path)
    if candidate.is_file():
        return candidate
    base = os.getenv(CONFIG_DIR_ENV)
    if base and not candidate.is_absolute():
        fallback = Path(base) / candidate
        if fallback.is_file():
            return fallback
    raise ConfigError(f'config file {path} not found')


def key_lines(text: str) -> dict[str, int]:
    """Map every dotted key to the 1-based line that defines it."""
    lines: dict[str, int] = {}
    table = ''
    for number, line in enumerate(text.splitlines(), start=1):
        header = _TABLE.match(line)
        if header:
            table = header.group(1)
            lines.setdefault(table, number)
            continue
        key = _KEY.match(line)
        if key:
            dotted = f'{table}.{key.group(1)}' if table else key.group(1)
            lines[dotted] = number
            lines.setdefault(dotted.split('.')[0], number)
    return lines


def parse_override(item: str) -> tuple[list[str], Any]:
    """`--env.task=STACK` -> (['env', 'task'], 'STACK'); values are TOML scalars or plain strings."""
    text = item[2:] if item.startswith('--') else item
    if '=' not in text:
        raise ConfigError(f'override {item!r} is not of the form --section.key=value')
    key, raw = text.split('=', 1)
    parts = key.strip().split('.')
    if len(parts) < 2 or not all(parts):
        raise ConfigError(f'override key {key!r} must be section.key')
    try:
        value = tomllib.loads(f'v = {raw}')['v']
    except tomllib.TOMLDecodeError:
        value = raw
    return parts, value


def _set(data: dict[str, Any], parts: Sequence[str], value: Any) -> None:
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f'{".".join(parts)} overrides a non-table value')
    node[parts[-1]] = value


def _raise_validation(exc: ValidationError, lines: dict[str, int], path: Optional[str]) -> None:
    error = exc.errors()[0]
    dotted = '.'.join(str(p) for p in error['loc'])
    line = None
    for depth in range(len(error['loc']), 0, -1):
        line = lines.get('.'.join(str(p) for p in error['loc'][:depth]))
        if line is not None:
            break
    raise ConfigError(f'{dotted}: {error["msg"]}', line=line, path=path) from None


def parse_config(text: str, overrides: Sequence[str] = (), path: Optional[str] = None) -> RunConfig:
    """Validate TOML text plus overrides into a `RunConfig`.

    Raises:
        ConfigError: Carrying the file line of the offending key when it is known.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        found = _TOML_LINE.search(str(exc))
        raise ConfigError(str(exc), line=int(found.group(1)) if found else None, path=path) from None
    for item in overrides:
        parts, value = parse_override(item)
        _set(data, parts, value)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        _raise_validation(exc, key_lines(text), path)


def load_config(path: Optional[str | Path] = None, overrides: Sequence[str] = ()) -> RunConfig:
    """Read a config file (defaults when `path` is None) and apply overrides."""
    if path is None:
        return parse_config('', overrides)
    resolved = resolve_config_path(path)
    logger.debug(f'loading config {resolved}')
    return parse_config(resolved.read_text(encoding='utf-8'), overrides, str(resolved))
