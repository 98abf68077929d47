"""Flat key/value config documents for DynamicsConfig.

Format: UTF-8 text, one `key = value` pair per line, `#` starts a comment,
blank lines ignored.  Keys must be DynamicsConfig field names; anything else
is rejected.  The environment variable ABIDE_CONFIG may name a config file.
"""

from __future__ import annotations

import os

from .dynamics import DynamicsConfig
from .errors import ConfigError

ENV_VAR = "ABIDE_CONFIG"

_INT_KEYS = {
    "timeout_threshold",
    "resize_threshold",
    "resize_increment",
    "initial_size",
    "max_size",
    "max_steps_factor",
}
_BOOL_KEYS = {"perturbation_enabled", "resize_enabled"}
_STR_KEYS = {"trigger_color"}
KNOWN_KEYS = _INT_KEYS | _BOOL_KEYS | _STR_KEYS


def _parse_value(key: str, raw: str, line_no: int):
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"line {line_no}: {key} expects an integer, got {raw!r}")
    if key in _BOOL_KEYS:
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"line {line_no}: {key} expects a boolean, got {raw!r}")
    return raw


def parse_config_text(text: str) -> dict:
    """Parse a config document into a field dict; unknown keys are rejected."""
    values: dict = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw, line_no)
    return values


def load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def resolve_config(
    overrides: dict | None = None,
    config_path: str | None = None,
    env: dict | None = None,
) -> DynamicsConfig:
    """Build a validated config with precedence overrides > file > defaults.

    The file comes from config_path, or failing that from ABIDE_CONFIG in the
    given environment mapping (os.environ by default).
    """
    env = os.environ if env is None else env
    values: dict = {}
    path = config_path or env.get(ENV_VAR)
    if path:
        values.update(load_config_file(path))
    if overrides:
        for key in overrides:
            if key not in KNOWN_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
        values.update(overrides)
    cfg = DynamicsConfig(**values)
    cfg.validate()
    return cfg
