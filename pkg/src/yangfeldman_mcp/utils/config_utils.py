"""
Configuration loading: a declarative key = value file read with python-dotenv,
environment defaults and command-line overrides.
"""

import logging
import os
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Union

from dotenv import dotenv_values

from ..api.errors import ConfigError
from ..api.graphs import SWITCHING_PROFILES
from ..api.lattice import H_PROFILES
from ..api.types import ExperimentConfig, LatticeConfig, RunConfig, TheoryConfig

logger = logging.getLogger(__name__)

LATTICE_KEYS: Dict[str, Callable[[str], Any]] = {
    "nt": int,
    "nx": int,
    "dt": float,
    "dx": float,
    "mass": float,
    "epsilon": float,
    "h_profile": str,
    "h_amplitude": float,
    "h_center": float,
    "h_width": float,
}
THEORY_KEYS: Dict[str, Callable[[str], Any]] = {
    "p": int,
    "lambda": float,
    "sigma_max": int,
    "switching": str,
}
RUN_KEYS: Dict[str, Callable[[str], Any]] = {
    "experiment": str,
    "output": str,
    "seed": int,
    "backend": str,
    "jobs": int,
    "identity": str,
    "order": int,
    "instances": int,
}
DEFAULT_LATTICE = {"nt": 8, "nx": 4, "dt": 0.5, "dx": 1.0, "mass": 1.0}
ENV_DEFAULTS = {"backend": "YF_BACKEND", "jobs": "YF_JOBS"}
MAX_SIGMA = 3


def _convert(key: str, raw: Any, kind: Callable[[str], Any]) -> Any:
    if raw is None:
        raise ConfigError(f"Config key '{key}' has no value")
    if not isinstance(raw, str):
        return kind(raw)
    try:
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"Config key '{key}' expects {kind.__name__}, got '{raw}'") from None


def _environment_defaults() -> Dict[str, str]:
    values = {}
    for key, variable in ENV_DEFAULTS.items():
        value = os.getenv(variable)
        if value:
            values[key] = value
    return values


def parse_config(values: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """
    Build an ExperimentConfig from flat key/value pairs.

    Values may be strings (as read from a file) or already typed. Overrides take
    precedence over values, values over YF_BACKEND/YF_JOBS from the environment.

    Raises:
        ConfigError: On unknown keys, values of the wrong type or out of range.
    """
    merged: Dict[str, Any] = dict(_environment_defaults())
    merged.update({k.strip().lower(): v for k, v in values.items()})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})

    known = set(LATTICE_KEYS) | set(THEORY_KEYS) | set(RUN_KEYS)
    unknown = sorted(set(merged) - known)
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")

    lattice = dict(DEFAULT_LATTICE)
    lattice.update({k: _convert(k, merged[k], kind) for k, kind in LATTICE_KEYS.items() if k in merged})
    theory = {k: _convert(k, merged[k], kind) for k, kind in THEORY_KEYS.items() if k in merged}
    if "lambda" in theory:
        theory["coupling"] = theory.pop("lambda")
    run = {k: _convert(k, merged[k], kind) for k, kind in RUN_KEYS.items() if k in merged}

    config = ExperimentConfig(
        lattice=LatticeConfig(**lattice),
        theory=TheoryConfig(**theory),
        run=RunConfig(**run),
    )
    validate_config(config)
    return config


def validate_config(config: ExperimentConfig) -> None:
    """
    Check the theory and run blocks; lattice geometry is validated by build_lattice.

    Raises:
        ConfigError: If a value is out of range.
    """
    theory, run = config.theory, config.run
    if theory.p not in (3, 4):
        raise ConfigError(f"p must be 3 or 4, got {theory.p}")
    if not 0 <= theory.sigma_max <= MAX_SIGMA:
        raise ConfigError(f"sigma_max must be between 0 and {MAX_SIGMA}, got {theory.sigma_max}")
    if theory.switching not in SWITCHING_PROFILES:
        raise ConfigError(f"Unknown switching '{theory.switching}'. Available: {', '.join(SWITCHING_PROFILES)}")
    if config.lattice.h_profile not in H_PROFILES:
        raise ConfigError(f"Unknown h_profile '{config.lattice.h_profile}'. Available: {', '.join(H_PROFILES)}")
    if run.backend not in ("exact", "float"):
        raise ConfigError(f"Unknown backend '{run.backend}'. Available backends: exact, float")
    if run.jobs < 1:
        raise ConfigError(f"jobs must be at least 1, got {run.jobs}")
    if run.order < 0 or run.instances < 1:
        raise ConfigError(f"order must be >= 0 and instances >= 1, got order={run.order}, instances={run.instances}")


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """
    Read a key = value config file and apply overrides.

    Args:
        path: Config file; only defaults, environment and overrides apply when None.
        overrides: Values that win over the file, e.g. from command-line flags.

    Returns:
        The validated ExperimentConfig.

    Raises:
        ConfigError: If the file is missing or holds invalid keys.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"Config file {path} not found")
        values = dict(dotenv_values(path))
        logger.info("Read %d config keys from %s", len(values), path)
    return parse_config(values, overrides)


def with_run(config: ExperimentConfig, **changes: Any) -> ExperimentConfig:
    """Copy of config with run fields replaced; None values are ignored."""
    changes = {k: v for k, v in changes.items() if v is not None}
    if not changes:
        return config
    updated = replace(config, run=replace(config.run, **changes))
    validate_config(updated)
    return updated
