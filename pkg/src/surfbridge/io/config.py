"""Flat ``key=value`` configuration files for :class:`TrainConfig`."""

from __future__ import annotations

import dataclasses
import math

from ..errors import UnknownKey, UnparsableValue
from ..pipeline.config import TrainConfig

_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


def _convert(name, raw, lineno):
    kind = type(getattr(TrainConfig(), name))
    try:
        value = float(raw)
    except ValueError:
        raise UnparsableValue(f"{name}: cannot parse {raw!r}", lineno) from None
    if not math.isfinite(value):
        raise UnparsableValue(f"{name}: value must be finite", lineno)
    if kind is int:
        if value != int(value):
            raise UnparsableValue(f"{name}: expected an integer, got {raw!r}", lineno)
        return int(value)
    return value


def parse_config(text) -> TrainConfig:
    """Unknown keys are errors; missing keys keep their defaults."""
    values, where = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UnparsableValue(f"expected key=value, got {line!r}", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise UnknownKey(f"unknown key {key!r}", lineno)
        if key in values:
            raise UnparsableValue(f"duplicate key {key!r}", lineno)
        values[key] = _convert(key, raw, lineno)
        where[key] = lineno
    try:
        return TrainConfig(**values)
    except ValueError as exc:
        bad = next((k for k in where if k in str(exc)), None)
        raise UnparsableValue(str(exc), where.get(bad)) from None


def read_config(path) -> TrainConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(config: TrainConfig) -> str:
    return "".join(f"{k}={v!r}\n" for k, v in config.to_dict().items())
