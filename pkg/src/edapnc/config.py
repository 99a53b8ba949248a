"""Experiment configuration files.

A config is a flat YAML mapping whose keys mirror :class:`Scenario` fields,
plus ``experiment``, ``output`` and a few experiment-specific keys::

    experiment: sum-rate        # sum-rate | region | asymptotic
    n_t: 2
    n_r: 2
    field: real                 # real | complex
    reciprocal: false
    snr_db: [0, 5, 10, 15, 20, 25, 30]
    alphas: [0.5]
    schemes: [capacity_ub, eda_exhaustive, eda_as2, dfnc]
    trials: 1000
    seed: 2024
    gamma_step: 0.02
    uplink_weights: [0.0, 0.2, 0.35, 0.5, 0.65, 0.8, 1.0]
    grid_n_angle: 48            # any GridSpec field with a grid_ prefix
    output: fig_sum_rate.csv

For ``experiment: asymptotic`` use ``n_t_values`` (list) and a single
``snr_db``.
"""

from dataclasses import fields, replace
from pathlib import Path

import yaml

from .harness import Scenario
from .optimizers import GridSpec

EXPERIMENTS = ("sum-rate", "region", "asymptotic")
_SCENARIO_KEYS = {f.name for f in fields(Scenario)} - {"grid"}
_GRID_KEYS = {f"grid_{f.name}" for f in fields(GridSpec)}
_EXTRA_KEYS = {"experiment", "output", "n_t_values", "workers"}
_TUPLE_KEYS = ("snr_db", "alphas", "schemes", "uplink_weights")


class ConfigError(ValueError):
    """Malformed or missing configuration."""


def load_config(path):
    """Read and validate a config file; returns a plain dict."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a key-value mapping at top level")
    unknown = set(data) - _SCENARIO_KEYS - _GRID_KEYS - _EXTRA_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    exp = data.get("experiment", "sum-rate")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"{path}: experiment must be one of {EXPERIMENTS}, got {exp!r}")
    return data


def scenario_from_config(cfg, **overrides):
    """Build a Scenario from a config dict; ``overrides`` win over the file."""
    merged = {**cfg, **{k: v for k, v in overrides.items() if v is not None}}
    kw = {}
    for key in _SCENARIO_KEYS & set(merged):
        val = merged[key]
        if key in _TUPLE_KEYS:
            val = tuple(val) if isinstance(val, (list, tuple)) else (val,)
            if key != "schemes":
                val = tuple(float(v) for v in val)
        kw[key] = val
    grid_kw = {k[len("grid_"):]: merged[k] for k in _GRID_KEYS & set(merged)}
    try:
        grid = replace(GridSpec(), **grid_kw)
        return Scenario(grid=grid, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
