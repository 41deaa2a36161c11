"""CLI configuration loaded from JSON, with an environment override for
the backend endpoint."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .mixtures import DEFAULT_CAP, DEFAULT_NEG_KEEP_PROB
from .schema import DEFAULT_ORDER, ORDERS

BACKEND_URL_ENV = "SCREENTK_BACKEND_URL"

_POSITIVE = ("max_in_flight", "timeout", "max_attempts", "max_tokens", "num_samples", "cap")
_NON_NEGATIVE = ("seed", "base_delay", "temperature", "flag_threshold")
_UNIT = ("cap", "neg_keep_prob", "flag_threshold")


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    backend_url: str | None = None
    max_in_flight: int = 8
    timeout: float = 60.0
    max_attempts: int = 3
    base_delay: float = 0.5
    seed: int = 0
    coord_order: str = DEFAULT_ORDER
    cap: float = DEFAULT_CAP
    neg_keep_prob: float = DEFAULT_NEG_KEEP_PROB
    temperature: float = 0.0
    max_tokens: int = 1024
    num_samples: int = 5
    flag_threshold: float = 0.2

    def __post_init__(self):
        for name in _POSITIVE:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in _NON_NEGATIVE:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        for name in _UNIT:
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must be within [0, 1]")
        if self.coord_order not in ORDERS:
            raise ConfigError(f"coord_order must be one of {sorted(ORDERS)}")

    @classmethod
    def from_dict(cls, obj: dict) -> "Config":
        known = {f.name: f for f in fields(cls)}
        unknown = set(obj) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key, value in obj.items():
            expected = known[key].type
            if key == "backend_url":
                ok = value is None or isinstance(value, str)
            elif expected == "int":
                ok = isinstance(value, int) and not isinstance(value, bool)
            elif expected == "float":
                ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            else:
                ok = isinstance(value, str)
            if not ok:
                raise ConfigError(f"config key {key!r} has the wrong type")
        return cls(**obj)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path: str | Path | None = None, **overrides) -> Config:
    """File values, then the environment, then non-None ``overrides``."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    if os.environ.get(BACKEND_URL_ENV):
        data["backend_url"] = os.environ[BACKEND_URL_ENV]
    data.update({k: v for k, v in overrides.items() if v is not None})
    return Config.from_dict(data)
