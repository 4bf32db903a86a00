"""Experiment configuration files."""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union
from urllib.parse import urlparse

import fsspec
from attrs import Factory, field, frozen, validators

from seqsense.detectors import DetectorModel, model_from_dict
from seqsense.fusion import DEFAULT_HORIZON, Scheme, SchemeConfig

LOG = logging.getLogger(__name__)

SEED_ENV_VAR: str = "SEQSENSE_SEED"
DEFAULT_SEED: int = 0


class ConfigError(ValueError):
    """Raised for malformed configuration files and unusable configurations."""


@frozen
class ConstantsConfig:
    """Settings of the model-constant estimation."""

    n_samples: int = field(default=100_000, validator=validators.ge(100_000))
    quantile: float = field(default=1e-4, validator=[validators.gt(0), validators.lt(1)])


@frozen
class CalibrationConfig:
    """Settings of the threshold search."""

    n_trials: int = field(default=10_000, validator=validators.ge(10_000))
    estimator: str = field(default="importance", validator=validators.in_(("importance", "direct")))
    kl_source: str = field(default="h1", validator=validators.in_(("h1", "h0", "mean")))
    tolerance: float = field(default=0.1, validator=validators.gt(0))
    rounds: int = field(default=3, validator=validators.ge(1))


def _targets(value) -> Tuple[Tuple[float, float], ...]:
    return tuple((float(a), float(b)) for a, b in value)


def _check_targets(instance, attribute, value):
    for alpha, beta in value:
        if not (alpha > 0 and beta > 0 and alpha + beta < 1):
            raise ValueError(f"Invalid error target ({alpha}, {beta}).")


@frozen
class ExperimentConfig:
    """A parsed experiment configuration.

    Parameters
    ----------
    models : tuple of DetectorModel
        One model shared by every SU, or one model per SU.
    schemes : tuple of SchemeConfig
        The schemes to compare, with bit budgets expanded.
    k_users : int, optional (default 2)
        Number of SUs.
    period : int, optional (default 4)
        Uniform sampling period.
    targets : tuple of (float, float), optional
        Error targets ``(alpha, beta)``.
    snr_db : tuple of float, optional
        SNR grid in dB.
    k_grid : tuple of int, optional
        Numbers of SUs to sweep.
    oc_delays : tuple of (float, float), optional
        Mean delay pairs ``(E0, E1)`` of the operating-characteristic sweep.
    period_scale : float, optional (default 1)
        Constant ``c`` of the period-scaling sweep, ``T = ceil(c sqrt|log alpha|)``.
    n_trials : int, optional (default 10000)
        Trials per hypothesis and configuration point.
    seed : int, optional (default 0)
        Master seed, already resolved against overrides.
    horizon : int, optional (default 1000000)
        Horizon per trial.
    manifest : str, optional (default "manifest.json")
        Calibration manifest, relative to the output directory.
    constants : ConstantsConfig
        Constant estimation settings.
    calibration : CalibrationConfig
        Threshold search settings.
    """

    models: Tuple[DetectorModel, ...] = field(converter=tuple)
    schemes: Tuple[SchemeConfig, ...] = field(converter=tuple)
    k_users: int = field(default=2, validator=validators.ge(1))
    period: int = field(default=4, validator=validators.ge(1))
    targets: Tuple[Tuple[float, float], ...] = field(
        default=((1e-2, 1e-2),), converter=_targets, validator=_check_targets
    )
    snr_db: Tuple[float, ...] = field(default=(), converter=tuple)
    k_grid: Tuple[int, ...] = field(default=(), converter=tuple)
    oc_delays: Tuple[Tuple[float, float], ...] = field(default=(), converter=_targets)
    period_scale: float = field(default=1.0, validator=validators.gt(0))
    n_trials: int = field(default=10_000, validator=validators.ge(1))
    seed: int = DEFAULT_SEED
    horizon: int = field(default=DEFAULT_HORIZON, validator=validators.ge(1))
    manifest: str = "manifest.json"
    constants: ConstantsConfig = Factory(ConstantsConfig)
    calibration: CalibrationConfig = Factory(CalibrationConfig)

    @models.validator
    def _check_models(self, attribute, value):
        if len(value) not in (1, self.k_users):
            raise ValueError(
                f"Expected 1 or {self.k_users} models for {self.k_users} SUs, got {len(value)}."
            )

    @schemes.validator
    def _check_schemes(self, attribute, value):
        if not value:
            raise ValueError("At least one scheme is required.")

    def su_models(self, k_users: Optional[int] = None) -> List[DetectorModel]:
        """One model per SU, replicating a shared model.

        Parameters
        ----------
        k_users : int, optional
            Overrides the configured number of SUs; needs a shared model.
        """
        k_users = self.k_users if k_users is None else k_users
        if len(self.models) == 1:
            return list(self.models) * k_users
        if k_users != len(self.models):
            raise ConfigError(
                f"Cannot run {k_users} SUs with {len(self.models)} per-SU models."
            )
        return list(self.models)


_SCHEMA: Dict[str, Union[type, Tuple[type, ...]]] = {
    "k_users": int,
    "models": list,
    "schemes": list,
    "bits": list,
    "period": int,
    "targets": list,
    "snr_db": list,
    "k_grid": list,
    "oc_delays": list,
    "period_scale": (int, float),
    "n_trials": int,
    "seed": int,
    "horizon": int,
    "manifest": str,
    "constants": dict,
    "calibration": dict,
}
_REQUIRED = ("models", "schemes")


def resolve_seed(flag: Optional[int] = None, configured: Optional[int] = None) -> int:
    """Seed precedence: command-line flag, config file, environment, default."""
    if flag is not None:
        return flag
    if configured is not None:
        return configured
    env = os.environ.get(SEED_ENV_VAR)
    if env:
        try:
            return int(env)
        except ValueError as err:
            raise ConfigError(f"``{SEED_ENV_VAR}`` must be an integer, got {env!r}.") from err
    return DEFAULT_SEED


def _schemes(items: List[Dict[str, Any]], bits: List[int], period: int) -> List[SchemeConfig]:
    out = []
    for item in items:
        if not isinstance(item, dict) or "kind" not in item:
            raise ConfigError(f"Every scheme needs a ``kind``, got {item!r}.")
        unknown = set(item) - {"kind", "bits", "delta"}
        if unknown:
            raise ConfigError(f"Unknown scheme keys: {sorted(unknown)}.")
        kind = Scheme(item["kind"])
        if kind is Scheme.CENTRALIZED:
            out.append(SchemeConfig(kind, period=period))
        elif "bits" in item:
            out.append(SchemeConfig(kind, item["bits"], period, item.get("delta")))
        else:
            out.extend(SchemeConfig(kind, s, period, item.get("delta")) for s in bits)
    return out


def config_from_dict(data: Dict[str, Any], seed: Optional[int] = None) -> ExperimentConfig:
    """Validate a configuration mapping and build the config.

    Parameters
    ----------
    data : dict
        The parsed file content.
    seed : int, optional
        A seed override with precedence over the file.

    Returns
    -------
    ExperimentConfig
        The configuration.

    Raises
    ------
    ConfigError
        Raised for unknown keys, wrong types and invalid values.
    """
    if not isinstance(data, dict):
        raise ConfigError("The configuration must be a JSON object.")
    for key, value in data.items():
        if key not in _SCHEMA:
            raise ConfigError(f"Unknown configuration key ``{key}``.")
        expected = _SCHEMA[key]
        if not isinstance(value, expected) or isinstance(value, bool):
            raise ConfigError(f"Configuration key ``{key}`` has the wrong type: {value!r}.")
    for key in _REQUIRED:
        if key not in data:
            raise ConfigError(f"Missing configuration key ``{key}``.")

    params = dict(data)
    try:
        period = params.pop("period", 4)
        bits = params.pop("bits", [1])
        params["models"] = [model_from_dict(item) for item in params["models"]]
        params["schemes"] = _schemes(params["schemes"], bits, period)
        params["constants"] = ConstantsConfig(**params.get("constants", {}))
        params["calibration"] = CalibrationConfig(**params.get("calibration", {}))
        params["seed"] = resolve_seed(seed, params.get("seed"))
        return ExperimentConfig(period=period, **params)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as err:
        raise ConfigError(f"Invalid configuration: {err}") from err


def load_config(
    fpath: Union[str, Path], seed: Optional[int] = None, **storage_options
) -> ExperimentConfig:
    """Read a JSON configuration file through ``fsspec``.

    Parameters
    ----------
    fpath : str or Path
        Location of the file; URLs select the filesystem.
    seed : int, optional
        Seed override.
    **storage_options
        Passed to ``fsspec.filesystem``.
    """
    if isinstance(fpath, str):
        parsed = urlparse(fpath)
        path, protocol = parsed.netloc + parsed.path, parsed.scheme or "file"
    else:
        path, protocol = str(fpath), "file"
    fs = fsspec.filesystem(protocol, **storage_options)
    if not fs.isfile(path):
        raise ConfigError(f"Configuration file {fpath} does not exist.")
    try:
        with fs.open(path, "r") as infile:
            data = json.load(infile)
    except json.JSONDecodeError as err:
        raise ConfigError(f"Configuration file {fpath} is not valid JSON: {err}") from err
    LOG.debug(f"Loaded configuration from {fpath}")

    return config_from_dict(data, seed=seed)
