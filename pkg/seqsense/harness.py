"""Monte Carlo experiments over calibrated configuration points."""

from __future__ import annotations

import logging
import math
import warnings
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
from urllib.parse import urlparse

import fsspec
from attrs import asdict, field, frozen

from seqsense.artifacts import get_handler
from seqsense.calibration import calibrate_delays, calibrate_thresholds, pooled_constants
from seqsense.config import ConfigError, ExperimentConfig
from seqsense.detectors import DetectorModel, Hypothesis, ModelConstants
from seqsense.entry import CalibrationEntry, point_slug
from seqsense.fusion import Scheme, SchemeConfig, TrialResult
from seqsense.manifest import Manifest
from seqsense.montecarlo import (
    Stream,
    censored_fraction,
    estimate_error_direct,
    estimate_error_importance,
    mean_delay,
    message_rate,
    simulate_trials,
)

LOG = logging.getLogger(__name__)

__all__ = [
    "COLUMNS",
    "FAMILIES",
    "ConfigPoint",
    "ExperimentSummary",
    "SummaryRow",
    "calibrate_points",
    "estimate_error_direct",
    "estimate_error_importance",
    "family_points",
    "run_experiment",
    "sweep",
]

COLUMNS: Tuple[str, ...] = (
    "scheme",
    "s_bits",
    "T",
    "K",
    "hyp",
    "target_alpha",
    "target_beta",
    "A",
    "B",
    "delta",
    "mean_delay",
    "se_delay",
    "err_direct",
    "se_err_direct",
    "err_is",
    "se_err_is",
    "msg_rate",
    "censored_frac",
    "n_trials",
    "seed",
)
FAMILIES: Tuple[str, ...] = ("error_grid", "snr_grid", "k_grid", "oc_curve", "period_scaling")
# Delay means are flagged above this censoring fraction.
CENSORING_LIMIT: float = 1e-3
# Bits of the decentralized schemes in the period-scaling family.
PERIOD_SCALING_BITS: int = 2


@frozen
class ConfigPoint:
    """One scheme at one point of an experiment grid.

    Parameters
    ----------
    scheme : SchemeConfig
        The scheme as configured (``delta``/``phi`` may be unresolved).
    models : tuple of DetectorModel
        One model per SU.
    targets : tuple of float, optional
        Error targets ``(alpha, beta)``.
    delays : tuple of float, optional
        Mean delay targets ``(E0, E1)``.
    stream : int, optional (default 0)
        Random stream shared by all schemes of the same grid point.
    snr_db : float, optional
        The SNR of the point, for SNR sweeps.
    """

    scheme: SchemeConfig
    models: Tuple[DetectorModel, ...] = field(converter=tuple)
    targets: Optional[Tuple[float, float]] = None
    delays: Optional[Tuple[float, float]] = None
    stream: int = 0
    snr_db: Optional[float] = None

    def slug(self, seed: int) -> str:
        """The manifest slug of the point."""
        return point_slug(self.scheme, self.models, self.targets, self.delays, seed)

    @property
    def k_users(self) -> int:
        """Number of SUs."""
        return len(self.models)


@frozen
class SummaryRow:
    """Aggregated trials of one scheme under one hypothesis; one CSV row.

    Under H0 the error columns estimate the false-alarm probability (counted
    on H0 trials, importance-sampled from H1 trials); under H1 they estimate
    the misdetection probability.
    """

    scheme: str
    s_bits: Optional[int]
    T: int
    K: int
    hyp: str
    target_alpha: float
    target_beta: float
    A: float
    B: float
    delta: Optional[float]
    mean_delay: float
    se_delay: float
    err_direct: float
    se_err_direct: float
    err_is: float
    se_err_is: float
    msg_rate: float
    censored_frac: float
    n_trials: int
    seed: int


@frozen
class ExperimentSummary:
    """All rows of an experiment, in point order with H0 before H1."""

    rows: Tuple[SummaryRow, ...] = field(converter=tuple)

    def records(self) -> List[Dict]:
        """Rows as dictionaries keyed by column."""
        return [asdict(row) for row in self.rows]

    def select(self, scheme: Optional[str] = None, hyp: Optional[str] = None) -> List[SummaryRow]:
        """Rows matching a scheme label and/or hypothesis name."""
        return [
            row
            for row in self.rows
            if (scheme is None or row.scheme == scheme) and (hyp is None or row.hyp == hyp)
        ]


def _normalize_family(family: str) -> str:
    name = family.replace("-", "_")
    if name not in FAMILIES:
        raise ConfigError(f"Unknown experiment family ``{family}``; expected one of {FAMILIES}.")
    return name


def _at_snr(models: Sequence[DetectorModel], snr_db: float) -> List[DetectorModel]:
    try:
        return [model.at_snr(snr_db) for model in models]
    except ValueError as err:
        raise ConfigError(str(err)) from err


def family_points(family: str, config: ExperimentConfig) -> List[ConfigPoint]:
    """Enumerate the configuration points of an experiment family.

    Parameters
    ----------
    family : str
        One of ``error_grid``, ``snr_grid``, ``k_grid``, ``oc_curve`` and
        ``period_scaling``; dashes are accepted in place of underscores.
    config : ExperimentConfig
        The experiment configuration.

    Returns
    -------
    list of ConfigPoint
        Points grouped by grid position, schemes in configured order.

    Raises
    ------
    ConfigError
        Raised for unknown families, empty grids and models without an SNR
        parametrization in SNR sweeps.
    """
    family = _normalize_family(family)
    points: List[ConfigPoint] = []

    if family == "error_grid":
        models = config.su_models()
        for stream, target in enumerate(config.targets):
            points += [ConfigPoint(s, models, targets=target, stream=stream) for s in config.schemes]
    elif family == "snr_grid":
        if not config.snr_db:
            raise ConfigError("The snr_grid family needs a non-empty ``snr_db`` list.")
        grid = [(snr, target) for snr in config.snr_db for target in config.targets]
        for stream, (snr, target) in enumerate(grid):
            models = _at_snr(config.su_models(), snr)
            points += [
                ConfigPoint(s, models, targets=target, stream=stream, snr_db=snr)
                for s in config.schemes
            ]
    elif family == "k_grid":
        if not config.k_grid:
            raise ConfigError("The k_grid family needs a non-empty ``k_grid`` list.")
        grid = [(k, target) for k in config.k_grid for target in config.targets]
        for stream, (k, target) in enumerate(grid):
            models = config.su_models(k)
            points += [ConfigPoint(s, models, targets=target, stream=stream) for s in config.schemes]
    elif family == "oc_curve":
        if not config.oc_delays:
            raise ConfigError("The oc_curve family needs a non-empty ``oc_delays`` list.")
        models = config.su_models()
        for stream, delays in enumerate(config.oc_delays):
            points += [ConfigPoint(s, models, delays=delays, stream=stream) for s in config.schemes]
    else:
        models = config.su_models()
        for stream, target in enumerate(config.targets):
            period = math.ceil(config.period_scale * math.sqrt(abs(math.log(target[0]))))
            schemes = [
                SchemeConfig(Scheme.CENTRALIZED, period=period),
                SchemeConfig(Scheme.QSPRT, PERIOD_SCALING_BITS, period),
                SchemeConfig(Scheme.RLTSPRT, PERIOD_SCALING_BITS, period),
            ]
            points += [ConfigPoint(s, models, targets=target, stream=stream) for s in schemes]

    return points


def calibrate_points(
    points: Sequence[ConfigPoint],
    config: ExperimentConfig,
    manifest: Manifest,
    workers: int = 1,
) -> int:
    """Calibrate every point missing from ``manifest`` and save it.

    Model constants are estimated once per distinct set of SU models.

    Returns
    -------
    int
        The number of newly calibrated points.
    """
    constants: Dict[Tuple[DetectorModel, ...], ModelConstants] = {}
    settings = config.calibration
    added = 0
    for point in points:
        slug = point.slug(config.seed)
        if slug in manifest:
            LOG.debug(f"{slug} is already calibrated")
            continue
        if point.models not in constants:
            constants[point.models] = pooled_constants(
                point.models, config.constants.n_samples, config.constants.quantile, config.seed
            )
        kwargs = dict(
            constants=constants[point.models],
            estimator=settings.estimator,
            kl_source=settings.kl_source,
            rounds=settings.rounds,
            horizon=config.horizon,
            workers=workers,
        )
        if point.delays is not None:
            result = calibrate_delays(
                point.scheme, point.models, point.delays, settings.n_trials, config.seed, **kwargs
            )
        else:
            result = calibrate_thresholds(
                point.scheme,
                point.models,
                *point.targets,
                settings.n_trials,
                config.seed,
                tolerance=settings.tolerance,
                **kwargs,
            )
        manifest.append(CalibrationEntry.from_result(result, point.models, config.seed, slug))
        added += 1
    if added:
        manifest.save()

    return added


def _summarize(
    point: ConfigPoint,
    entry: CalibrationEntry,
    trials: Dict[Hypothesis, List[TrialResult]],
    config: ExperimentConfig,
) -> List[SummaryRow]:
    scheme = entry.scheme_config
    target_alpha, target_beta = point.targets if point.targets else (math.nan, math.nan)
    rows = []
    for hyp in Hypothesis:
        batch = trials[hyp]
        delay, se_delay = mean_delay(batch)
        censored = censored_fraction(batch)
        if censored > CENSORING_LIMIT:
            message = (
                f"{scheme.label} under {hyp.name}: {censored:.2%} of the trials are censored; "
                "the mean delay includes them at the horizon."
            )
            LOG.warning(message)
            warnings.warn(message, UserWarning, stacklevel=2)
        direct = estimate_error_direct(batch, hyp)
        importance = estimate_error_importance(trials[hyp.opposite], hyp.opposite)
        rows.append(
            SummaryRow(
                scheme=scheme.label,
                s_bits=scheme.bits,
                T=scheme.period,
                K=point.k_users,
                hyp=hyp.name,
                target_alpha=target_alpha,
                target_beta=target_beta,
                A=entry.a,
                B=entry.b,
                delta=scheme.delta,
                mean_delay=delay,
                se_delay=se_delay,
                err_direct=direct.value,
                se_err_direct=direct.se,
                err_is=importance.value,
                se_err_is=importance.se,
                msg_rate=message_rate(batch),
                censored_frac=censored,
                n_trials=len(batch),
                seed=config.seed,
            )
        )
    return rows


def run_experiment(
    config: ExperimentConfig,
    manifest: Manifest,
    points: Optional[Sequence[ConfigPoint]] = None,
    workers: int = 1,
) -> ExperimentSummary:
    """Run ``n_trials`` trials per hypothesis at every calibrated point.

    Trial ``i`` of a point uses the seed key ``(stream, hypothesis, i)``, so
    every scheme of a grid point sees the same per-trial seeds and the
    summary does not depend on ``workers``.

    Parameters
    ----------
    config : ExperimentConfig
        The experiment configuration.
    manifest : Manifest
        Calibrated thresholds of every point.
    points : sequence of ConfigPoint, optional
        The points to run; the error-grid points of ``config`` by default.
    workers : int, optional (default 1)
        Number of ``joblib`` workers.

    Returns
    -------
    ExperimentSummary
        Two rows per point.

    Raises
    ------
    ConfigError
        Raised when the manifest does not exist or lacks a point.
    """
    if points is None:
        points = family_points("error_grid", config)
    if not manifest.entries and not manifest.exists:
        raise ConfigError(f"Calibration manifest {manifest.fpath} does not exist; run ``calibrate`` first.")

    rows: List[SummaryRow] = []
    for point in points:
        slug = point.slug(config.seed)
        try:
            entry = manifest[slug]
        except KeyError as err:
            raise ConfigError(
                f"Calibration manifest {manifest.fpath} has no entry {slug}; run ``calibrate`` first."
            ) from err
        trials = {
            hyp: simulate_trials(
                entry.scheme_config,
                point.models,
                entry.thresholds,
                hyp,
                config.n_trials,
                config.seed,
                key=(Stream.EXPERIMENT, point.stream),
                horizon=config.horizon,
                workers=workers,
            )
            for hyp in Hypothesis
        }
        rows += _summarize(point, entry, trials, config)
        LOG.info(f"Finished {entry.scheme_config.label} at {slug}")

    return ExperimentSummary(rows)


def _filesystem(out_dir: Union[str, Path]):
    if isinstance(out_dir, str):
        parsed = urlparse(out_dir)
        return fsspec.filesystem(parsed.scheme or "file"), parsed.netloc + parsed.path
    return fsspec.filesystem("file"), str(out_dir)


def manifest_path(config: ExperimentConfig, out_dir: Union[str, Path]) -> str:
    """Location of the calibration manifest for an output directory."""
    if isinstance(out_dir, str) and urlparse(out_dir).scheme:
        return f"{out_dir.rstrip('/')}/{config.manifest}"
    return str(Path(out_dir) / config.manifest)


def _point_metadata(point: ConfigPoint, seed: int) -> Dict:
    return {
        "slug": point.slug(seed),
        "scheme": point.scheme.label,
        "T": point.scheme.period,
        "K": point.k_users,
        "snr_db": point.snr_db,
        "targets": None if point.targets is None else list(point.targets),
        "delays": None if point.delays is None else list(point.delays),
        "stream": point.stream,
    }


def sweep(
    family: str,
    config: ExperimentConfig,
    out_dir: Union[str, Path],
    workers: int = 1,
    calibrate: bool = True,
) -> str:
    """Run an experiment family and write its result table.

    Writes ``<family>.csv`` with the columns of :py:data:`COLUMNS` and a
    ``<family>.json`` sidecar describing the points.

    Parameters
    ----------
    family : str
        The experiment family.
    config : ExperimentConfig
        The experiment configuration.
    out_dir : str or Path
        Output directory; also holds the calibration manifest.
    workers : int, optional (default 1)
        Number of ``joblib`` workers.
    calibrate : bool, optional (default True)
        Calibrate points missing from the manifest instead of failing.

    Returns
    -------
    str
        The path of the CSV file.
    """
    family = _normalize_family(family)
    points = family_points(family, config)
    manifest = Manifest(manifest_path(config, out_dir), mode="w+")
    if calibrate:
        calibrate_points(points, config, manifest, workers)
    summary = run_experiment(config, manifest, points, workers)

    fs, directory = _filesystem(out_dir)
    table = get_handler("csv").construct(name=family, value=summary.records(), columns=COLUMNS)
    sidecar = get_handler("json").construct(
        name=family,
        value={
            "family": family,
            "seed": config.seed,
            "n_trials": config.n_trials,
            "points": [_point_metadata(point, config.seed) for point in points],
        },
    )
    sidecar.save(fs, directory)
    fpath = table.save(fs, directory)
    LOG.info(f"Wrote {len(summary.rows)} rows to {fpath}")

    return fpath
