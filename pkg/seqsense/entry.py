"""Calibration manifest entries."""

import json
import math
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence, Tuple

from attrs import Factory, asdict, define, frozen
from slugify import slugify

from seqsense.calibration import CalibrationResult
from seqsense.detectors import DetectorModel, ModelConstants, model_from_dict
from seqsense.fusion import SchemeConfig, SprtThresholds


def serializer(inst, field, value):
    """Datetime and tuple converter for :meth:`attrs.asdict`."""
    if isinstance(value, datetime):
        return value.isoformat(timespec="seconds")
    if isinstance(value, tuple):
        return list(value)
    return value


def _target_key(targets: Optional[Tuple[float, float]], delays: Optional[Tuple[float, float]]):
    if delays is not None:
        return f"delays-{delays[0]:g}-{delays[1]:g}"
    return f"errors-{targets[0]:g}-{targets[1]:g}"


def point_slug(
    scheme: SchemeConfig,
    models: Sequence[DetectorModel],
    targets: Optional[Tuple[float, float]] = None,
    delays: Optional[Tuple[float, float]] = None,
    seed: int = 0,
) -> str:
    """Slug identifying one calibrated configuration point.

    Parameters
    ----------
    scheme : SchemeConfig
        The scheme. ``delta`` and ``phi`` do not enter the slug.
    models : sequence of DetectorModel
        One model per SU.
    targets : tuple of float, optional
        Error targets ``(alpha, beta)``.
    delays : tuple of float, optional
        Delay targets ``(E0, E1)``; take precedence over ``targets``.
    seed : int, optional (default 0)
        The master seed.

    Returns
    -------
    str
        The slug.
    """
    if targets is None and delays is None:
        raise ValueError("A point needs error targets or delay targets.")
    described = json.dumps([model.to_dict() for model in models], sort_keys=True)
    return slugify(
        f"{scheme.label}-T{scheme.period}-K{len(models)}-{described}-"
        f"{_target_key(targets, delays)}-seed{seed}"
    )


@define
class CalibrationEntry:
    """One calibrated configuration point, as stored in the manifest.

    This class is not meant to be initialized directly. Build it with
    :py:meth:`CalibrationEntry.from_result` or through
    :py:class:`seqsense.manifest.Manifest`.

    Parameters
    ----------
    slug : str
        Identifies the configuration point.
    scheme : str
        The scheme kind.
    bits : int, optional
        Bits per message.
    period : int
        Uniform sampling period.
    k_users : int
        Number of SUs.
    models : list of dict
        Serialized per-SU models.
    a, b : float
        FC thresholds.
    delta, phi : float, optional
        Sampler parameters of the decentralized schemes.
    kl_h0, kl_h1, model_phi : float
        The pooled model constants.
    achieved_alpha, se_alpha, achieved_beta, se_beta : float
        Achieved error probabilities on the calibration trials.
    rate_h0, rate_h1 : float
        Long-run message rates.
    delay_h0, delay_h1 : float
        Mean delays on the calibration trials.
    gap_alpha, gap_beta : bool
        Achievability-gap flags.
    target_alpha, target_beta : float
        Error targets; ``nan`` for delay-matched points.
    target_delays : list of float, optional
        Delay targets of delay-matched points.
    seed : int
        The master seed.
    created_at : datetime, optional (default ``datetime.now()``)
        When the point was calibrated.
    """

    slug: str
    scheme: str
    bits: Optional[int]
    period: int
    k_users: int
    models: List[Dict[str, Any]]
    a: float
    b: float
    delta: Optional[float]
    phi: Optional[float]
    kl_h0: float
    kl_h1: float
    model_phi: float
    achieved_alpha: float
    se_alpha: float
    achieved_beta: float
    se_beta: float
    rate_h0: float
    rate_h1: float
    delay_h0: float
    delay_h1: float
    gap_alpha: bool = False
    gap_beta: bool = False
    target_alpha: float = math.nan
    target_beta: float = math.nan
    target_delays: Optional[List[float]] = None
    seed: int = 0
    created_at: datetime = Factory(datetime.now)

    @classmethod
    def from_result(
        cls,
        result: CalibrationResult,
        models: Sequence[DetectorModel],
        seed: int,
        slug: Optional[str] = None,
    ) -> "CalibrationEntry":
        """Record a calibration result.

        Parameters
        ----------
        result : CalibrationResult
            The result.
        models : sequence of DetectorModel
            The per-SU models the result was calibrated for.
        seed : int
            The master seed.
        slug : str, optional
            The point slug; derived with :py:func:`point_slug` when omitted.
        """
        scheme = result.scheme
        if slug is None:
            targets = None if result.target_delays else (result.target_alpha, result.target_beta)
            slug = point_slug(scheme, models, targets, result.target_delays, seed)
        return cls(
            slug=slug,
            scheme=scheme.kind.value,
            bits=scheme.bits,
            period=scheme.period,
            k_users=len(models),
            models=[model.to_dict() for model in models],
            a=result.thresholds.a,
            b=result.thresholds.b,
            delta=scheme.delta,
            phi=scheme.phi,
            kl_h0=result.constants.kl_h0,
            kl_h1=result.constants.kl_h1,
            model_phi=result.constants.phi,
            achieved_alpha=result.achieved_alpha.value,
            se_alpha=result.achieved_alpha.se,
            achieved_beta=result.achieved_beta.value,
            se_beta=result.achieved_beta.se,
            rate_h0=result.message_rate[0],
            rate_h1=result.message_rate[1],
            delay_h0=result.mean_delays[0],
            delay_h1=result.mean_delays[1],
            gap_alpha=result.gap_alpha,
            gap_beta=result.gap_beta,
            target_alpha=result.target_alpha,
            target_beta=result.target_beta,
            target_delays=None if result.target_delays is None else list(result.target_delays),
            seed=seed,
        )

    @property
    def scheme_config(self) -> SchemeConfig:
        """The resolved scheme."""
        return SchemeConfig(self.scheme, self.bits, self.period, self.delta, self.phi)

    @property
    def thresholds(self) -> SprtThresholds:
        """The calibrated FC thresholds."""
        return SprtThresholds(self.a, self.b)

    @property
    def constants(self) -> ModelConstants:
        """The pooled model constants."""
        return ModelConstants(self.kl_h0, self.kl_h1, self.model_phi)

    def su_models(self) -> List[DetectorModel]:
        """Rebuild the per-SU models."""
        return [model_from_dict(item) for item in self.models]

    def to_dict(self) -> Dict:
        """Serialize the entry to a dictionary.

        Returns
        -------
        Dict
            The entry dictionary.
        """
        return asdict(self, value_serializer=serializer)


@frozen
class ReadOnlyCalibrationEntry(CalibrationEntry):
    """Immutable version of a manifest entry."""
