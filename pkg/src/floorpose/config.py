"""Run configuration: a flat TOML key-value file plus --set overrides.

Every tunable the subcommands share lives here so a run is reproducible
from one artifact. Unknown keys are rejected rather than ignored.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path

from .errors import ConfigError
from .evaluation import DEFAULT_BETA, DEFAULT_S_Q, DEFAULT_S_X
from .georeg import DEFAULT_RANSAC_THRESHOLD
from .pipeline import (
    DEFAULT_ALIGNMENT_THRESHOLD,
    DEFAULT_FRAME_INTERVAL,
    TEST_START_DEFAULT,
    TRAIN_CUTOFF_DEFAULT,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class Config:
    floor: str = "Floor"
    plan_meta: str = ""
    train_cutoff: datetime = TRAIN_CUTOFF_DEFAULT
    test_start: datetime = TEST_START_DEFAULT
    frame_interval: int = DEFAULT_FRAME_INTERVAL
    alignment_threshold: float = DEFAULT_ALIGNMENT_THRESHOLD
    ransac_threshold: float = DEFAULT_RANSAC_THRESHOLD
    robust: bool = False
    beta: float = DEFAULT_BETA
    s_x: float = DEFAULT_S_X
    s_q: float = DEFAULT_S_Q
    meters_per_pixel: float = 1.0
    executor: str = ""
    jobs: int = 1
    seed: int = 0

    def validate(self) -> "Config":
        if self.frame_interval < 1:
            raise ConfigError("frame_interval must be >= 1")
        if not 0 < self.alignment_threshold <= 1:
            raise ConfigError("alignment_threshold must be in (0, 1]")
        if self.ransac_threshold <= 0:
            raise ConfigError("ransac_threshold must be positive")
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        if self.meters_per_pixel <= 0:
            raise ConfigError("meters_per_pixel must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not self.train_cutoff < self.test_start:
            raise ConfigError("train_cutoff must precede test_start")
        return self


_FIELDS = {f.name: f.type for f in dataclasses.fields(Config)}


def _coerce(key: str, value):
    want = _FIELDS[key]
    if want == "datetime":
        if isinstance(value, datetime):
            return value
        if isinstance(value, date):
            return datetime(value.year, value.month, value.day)
        try:
            return datetime.fromisoformat(str(value))
        except ValueError:
            raise ConfigError(f"{key}: cannot parse date {value!r}") from None
    if want == "bool":
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: cannot parse boolean {value!r}")
    try:
        if want == "int":
            return int(value)
        if want == "float":
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {value!r} as {want}") from None
    return str(value)


def _build(values: dict) -> Config:
    unknown = set(values) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return Config(**{k: _coerce(k, v) for k, v in values.items()}).validate()


def load_config(path=None, overrides=()) -> Config:
    """Parse the TOML file (flat keys only), then apply key=value overrides."""
    values: dict = {}
    if path is not None:
        try:
            with open(Path(path), "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"malformed config {path}: {e}") from None
        for key, value in raw.items():
            if isinstance(value, dict):
                raise ConfigError(f"config must be flat; found table {key!r}")
            values[key] = value
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"unknown config keys: [{key!r}]")
        values[key] = value.strip()
    return _build(values)
