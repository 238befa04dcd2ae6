"""Configuration file loading (TOML or JSON) with strict key checking."""
from __future__ import annotations

import copy
import json
import os
from pathlib import Path

from .errors import ConfigError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SEED_ENV = "DMPKIT_SEED"

DEFAULTS = {
    "controller": {
        "k_p": 25.0,
        "k_v": 10.0,
        "k_c": 1000.0,
        "alpha_e": 50.0,
        "feedforward_enabled": True,
        "k_t": 0.0,
        "a_max": 10.0,
        "velocity_cutoff": 20.0,
    },
    "sim": {
        "pos_meas_std": 0.001,
        "vel_proc_std": 0.001,
        "kinematic_bias_std": 0.001,
        "kinematic_bias_rate": 0.1,
        "seed": 0,
        "delay": 0.012,
        "dt": 0.004,
        "duration": 10.0,
        "t_start": 2.0,
        "t_end": 3.0,
        "move_amplitude": 0.05,
        "move_channel": 0,
    },
    "dmp": {
        "n_basis": 30,
        "alpha_z": 25.0,
        "alpha_x": 1.0,
        "tau": None,
    },
    "detector": {
        "lr": 0.01,
        "steps": 2000,
        "r": 20.0,
        "final_r": 100.0,
        "max_window": 30,
        "seed": 0,
        "refractory": 0.5,
    },
}

_INT_KEYS = {"seed", "steps", "max_window", "n_basis", "move_channel"}
_BOOL_KEYS = {"feedforward_enabled"}
_NULLABLE = {("dmp", "tau")}


def _check_value(section: str, key: str, value):
    if value is None and (section, key) in _NULLABLE:
        return None
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(f"{section}.{key} must be a boolean")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number")
    if key in _INT_KEYS:
        if int(value) != value:
            raise ConfigError(f"{section}.{key} must be an integer")
        return int(value)
    return float(value)


def merge_config(overrides: dict) -> dict:
    """Defaults updated with ``overrides``; unknown sections or keys raise."""
    cfg = copy.deepcopy(DEFAULTS)
    if not isinstance(overrides, dict):
        raise ConfigError("configuration must be a table of sections")
    for section, values in overrides.items():
        if section not in cfg:
            raise ConfigError(f"unknown configuration section '{section}'")
        if not isinstance(values, dict):
            raise ConfigError(f"section '{section}' must be a table")
        for key, value in values.items():
            if key not in cfg[section]:
                raise ConfigError(f"unknown key '{section}.{key}'")
            cfg[section][key] = _check_value(section, key, value)
    return cfg


def load_config(path=None) -> dict:
    return merge_config(read_config_file(path) if path is not None else {})


def read_config_file(path) -> dict:
    """The sections and keys a file sets, validated but not merged."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    merge_config(data)
    return {sec: {k: _check_value(sec, k, v) for k, v in vals.items()} for sec, vals in data.items()}


def resolve_seed(flag, fallback: int) -> int:
    """Explicit flag, else the DMPKIT_SEED environment variable, else ``fallback``."""
    if flag is not None:
        return int(flag)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return int(fallback)
