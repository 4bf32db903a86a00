"""Local sensing models and their per-sample log-likelihood ratios."""

from __future__ import annotations

import logging
import math
from abc import ABCMeta, abstractmethod
from enum import IntEnum
from typing import Any, ClassVar, Dict, Iterable, List, Optional, Tuple, Type, Union

import numpy as np
from attrs import asdict, define, evolve, field, frozen
from scipy.signal import lfilter, lfiltic
from scipy.special import i0e

LOG = logging.getLogger(__name__)


class Hypothesis(IntEnum):
    """The two hypotheses: primary user absent (``H0``) or present (``H1``)."""

    H0 = 0
    H1 = 1

    @property
    def opposite(self) -> Hypothesis:
        """The other hypothesis."""
        return Hypothesis(1 - self.value)


class IndistinguishableHypothesesError(RuntimeError):
    """Raised when the Monte Carlo KL estimate cannot be told apart from zero."""


def _positive(instance, attribute, value):
    if not value > 0:
        raise ValueError(f"``{attribute.name}`` must be positive, got {value}.")


def _nonnegative(instance, attribute, value):
    if not value >= 0:
        raise ValueError(f"``{attribute.name}`` must be non-negative, got {value}.")


def complex_normal(variance: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw circularly-symmetric complex Gaussian samples.

    Parameters
    ----------
    variance : float
        Total variance ``E|y|^2``. Each of the real and imaginary parts has
        variance ``variance / 2``.
    size : int
        Number of samples.
    rng : numpy.random.Generator
        The random stream.

    Returns
    -------
    numpy.ndarray
        Complex samples.
    """
    parts = rng.normal(scale=math.sqrt(variance / 2), size=(size, 2))
    return parts[:, 0] + 1j * parts[:, 1]


def log_i0(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Overflow-safe ``log I0(x)`` for ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    out = np.log(i0e(x)) + x
    return float(out) if out.ndim == 0 else out


@frozen
class DetectorModel(metaclass=ABCMeta):
    """Interface shared by the local sensing models.

    A model knows how to draw observations under either hypothesis and how to
    turn a block of observations into per-sample LLR increments. Models with
    memory (the spectral-shape detector) carry their last ``memory`` samples
    between blocks through the ``history`` argument, oldest sample first.

    Attributes
    ----------
    kind : str
        Alias used in experiment configs.
    """

    kind: ClassVar[str]

    @property
    def memory(self) -> int:
        """Number of past samples the LLR depends on."""
        return 0

    @abstractmethod
    def generate(
        self,
        hyp: Hypothesis,
        size: int,
        rng: np.random.Generator,
        history: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Draw ``size`` consecutive observations under ``hyp``."""

    @abstractmethod
    def llr(self, samples: np.ndarray, history: Optional[np.ndarray] = None) -> np.ndarray:
        """Compute the LLR increment of every sample in ``samples``."""

    def at_snr(self, snr_db: float) -> DetectorModel:
        """Return a copy of the model operating at ``snr_db``.

        Raises
        ------
        ValueError
            Raised if the model has no SNR parametrization.
        """
        raise ValueError(f"SNR sweeps are not defined for the ``{self.kind}`` model.")

    def to_dict(self) -> Dict[str, Any]:
        """Serialize the model parameters, including the ``kind`` alias."""
        return {"kind": self.kind, **asdict(self)}


@frozen
class EnergyDetectorParams(DetectorModel):
    """Energy detector: ``gamma ~ chi2_2`` under H0 and ``chi2_2(theta)`` under H1.

    Parameters
    ----------
    theta : float
        Noncentrality parameter. The received SNR is ``theta / 2``.
    """

    kind: ClassVar[str] = "energy"
    theta: float = field(converter=float, validator=_nonnegative)

    def generate(self, hyp, size, rng, history=None):
        """Draw normalized energies ``gamma = |y|^2 / (sigma_w^2 / 2)``."""
        if hyp == Hypothesis.H1 and self.theta > 0:
            return rng.noncentral_chisquare(2, self.theta, size=size)
        return rng.chisquare(2, size=size)

    def llr(self, samples, history=None):
        """Per-sample LLR of the normalized energies."""
        return llr_energy(self, samples)

    def at_snr(self, snr_db):
        """SNR ``theta / 2`` in dB."""
        return evolve(self, theta=2 * 10 ** (snr_db / 10))


@frozen
class SpectralShapeParams(DetectorModel):
    """Spectral-shape detector: white noise under H0, AR(p) signal under H1.

    Parameters
    ----------
    ar_coeffs : tuple of float
        AR coefficients ``a_1, ..., a_p``. The AR polynomial must be stable.
    sigma_w2 : float
        Noise variance under H0.
    sigma_v2 : float
        Innovation variance of the AR process under H1.
    """

    kind: ClassVar[str] = "spectral"
    ar_coeffs: Tuple[float, ...] = field(converter=lambda v: tuple(float(a) for a in v))
    sigma_w2: float = field(default=1.0, converter=float, validator=_positive)
    sigma_v2: float = field(default=1.0, converter=float, validator=_positive)

    @ar_coeffs.validator
    def _check_stable(self, attribute, value):
        if len(value) < 1:
            raise ValueError("The AR model needs at least one coefficient.")
        roots = np.roots([1.0, *(-a for a in value)])
        if np.any(np.abs(roots) >= 1.0):
            raise ValueError(
                f"AR coefficients {list(value)} are not stable; all roots of the "
                "characteristic polynomial must lie inside the unit circle."
            )

    @property
    def memory(self) -> int:
        """AR order ``p``."""
        return len(self.ar_coeffs)

    @property
    def _denominator(self) -> np.ndarray:
        return np.array([1.0, *(-a for a in self.ar_coeffs)])

    def generate(self, hyp, size, rng, history=None):
        """Draw complex samples; the H1 recursion continues from ``history``."""
        if hyp == Hypothesis.H0:
            return complex_normal(self.sigma_w2, size, rng)
        history = _pad_history(history, self.memory)
        innovations = complex_normal(self.sigma_v2, size, rng)
        zi = lfiltic([1.0], self._denominator, history[::-1])
        samples, _ = lfilter([1.0], self._denominator, innovations, zi=zi)
        return samples

    def llr(self, samples, history=None):
        """Conditional LLR of each sample given the previous ``p`` samples."""
        history = _pad_history(history, self.memory)
        full = np.concatenate([history, np.asarray(samples, dtype=complex)])
        prediction = lfilter([0.0, *self.ar_coeffs], [1.0], full)[self.memory :]
        return _spectral_terms(self, full[self.memory :], prediction)


@frozen
class GaussianDetectorParams(DetectorModel):
    """Gaussian detector: ``Nc(0, sigma_w2)`` against ``Nc(0, rho2 + sigma_w2)``.

    Parameters
    ----------
    rho2 : float
        Fading channel power.
    sigma_w2 : float
        Noise variance.
    """

    kind: ClassVar[str] = "gaussian"
    rho2: float = field(converter=float, validator=_nonnegative)
    sigma_w2: float = field(default=1.0, converter=float, validator=_positive)

    def generate(self, hyp, size, rng, history=None):
        """Draw complex samples."""
        variance = self.sigma_w2 + (self.rho2 if hyp == Hypothesis.H1 else 0.0)
        return complex_normal(variance, size, rng)

    def llr(self, samples, history=None):
        """Per-sample LLR from ``|y|^2``."""
        return llr_gaussian(self, np.abs(samples) ** 2)

    def at_snr(self, snr_db):
        """SNR ``rho2 / sigma_w2`` in dB."""
        return evolve(self, rho2=self.sigma_w2 * 10 ** (snr_db / 10))


MODELS: Dict[str, Type[DetectorModel]] = {
    cls.kind: cls
    for cls in (EnergyDetectorParams, SpectralShapeParams, GaussianDetectorParams)
}


def model_from_dict(data: Dict[str, Any]) -> DetectorModel:
    """Build a detector model from its serialized form.

    Parameters
    ----------
    data : dict
        The model parameters with a ``kind`` key naming the model.

    Returns
    -------
    DetectorModel
        The model.

    Raises
    ------
    ValueError
        Raised for an unknown ``kind`` or unexpected parameter names.
    """
    params = dict(data)
    kind = params.pop("kind", None)
    if kind not in MODELS:
        raise ValueError(f"Unknown detector model ``{kind}``; expected one of {sorted(MODELS)}.")
    try:
        return MODELS[kind](**params)
    except TypeError as err:
        raise ValueError(f"Invalid parameters for the ``{kind}`` model: {sorted(params)}") from err


def _pad_history(history: Optional[np.ndarray], memory: int) -> np.ndarray:
    """Return the last ``memory`` samples, zero-padded on the left."""
    if memory == 0:
        return np.zeros(0, dtype=complex)
    history = np.zeros(0, dtype=complex) if history is None else np.asarray(history, dtype=complex)
    if history.size >= memory:
        return history[history.size - memory :]
    return np.concatenate([np.zeros(memory - history.size, dtype=complex), history])


def _spectral_terms(params: SpectralShapeParams, samples, prediction):
    return (
        np.abs(samples) ** 2 / params.sigma_w2
        - np.abs(samples - prediction) ** 2 / params.sigma_v2
        + math.log(params.sigma_w2 / params.sigma_v2)
    )


def generate_observation(
    model: DetectorModel,
    hyp: Hypothesis,
    history: Optional[np.ndarray],
    rng: np.random.Generator,
):
    """Draw a single observation.

    Parameters
    ----------
    model : DetectorModel
        The sensing model.
    hyp : Hypothesis
        The true hypothesis.
    history : numpy.ndarray, optional
        Recent observations, oldest first. Zero-padded when shorter than the
        model memory.
    rng : numpy.random.Generator
        The random stream.

    Returns
    -------
    float or complex
        A normalized energy for the energy detector, a complex sample otherwise.
    """
    return model.generate(hyp, 1, rng, history)[0]


def llr_energy(params: EnergyDetectorParams, gamma):
    """Energy-detector LLR ``log I0(sqrt(theta * gamma)) - theta / 2``.

    Parameters
    ----------
    params : EnergyDetectorParams
        The detector parameters.
    gamma : float or numpy.ndarray
        Normalized energies, non-negative.

    Returns
    -------
    float or numpy.ndarray
        The LLR, with the same shape as ``gamma``.
    """
    return log_i0(np.sqrt(params.theta * np.asarray(gamma, dtype=float))) - params.theta / 2


def llr_spectral(params: SpectralShapeParams, y_t: complex, history) -> float:
    """Spectral-shape LLR of ``y_t`` given its last ``p`` predecessors.

    Parameters
    ----------
    params : SpectralShapeParams
        The detector parameters.
    y_t : complex
        The current sample.
    history : array-like
        Past samples, oldest first, so ``history[-1]`` is ``y_{t-1}``.
        Zero-padded when shorter than ``p``.

    Returns
    -------
    float
        The LLR increment.
    """
    past = _pad_history(np.asarray(history, dtype=complex), params.memory)
    prediction = sum(a * past[-i] for i, a in enumerate(params.ar_coeffs, start=1))
    return float(_spectral_terms(params, complex(y_t), prediction))


def llr_gaussian(params: GaussianDetectorParams, y_abs2):
    """Gaussian-detector LLR, affine in ``|y|^2``."""
    total = params.rho2 + params.sigma_w2
    slope = params.rho2 / (params.sigma_w2 * total)
    return slope * np.asarray(y_abs2, dtype=float) + math.log(params.sigma_w2 / total)


@define
class LlrStream:
    """Stream of LLR increments for one SU under a fixed hypothesis.

    Parameters
    ----------
    model : DetectorModel
        The SU's sensing model.
    hyp : Hypothesis
        The hypothesis generating the observations.
    history : numpy.ndarray, optional
        The last ``model.memory`` observations, oldest first. Starts at zero.
    """

    model: DetectorModel
    hyp: Hypothesis = field(converter=Hypothesis)
    history: np.ndarray = field()

    @history.default
    def _history_default(self) -> np.ndarray:
        return np.zeros(self.model.memory, dtype=complex)

    def draw(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw the next ``size`` LLR increments.

        Parameters
        ----------
        size : int
            Number of time steps.
        rng : numpy.random.Generator
            The random stream.

        Returns
        -------
        numpy.ndarray
            Real LLR increments.
        """
        samples = self.model.generate(self.hyp, size, rng, self.history)
        out = np.asarray(self.model.llr(samples, self.history), dtype=float)
        if self.model.memory:
            self.history = _pad_history(
                np.concatenate([self.history, samples]), self.model.memory
            )
        return out


@frozen
class ModelConstants:
    """Constants of a sensing model needed for calibration.

    Parameters
    ----------
    kl_h0 : float
        ``|E0[l]|``.
    kl_h1 : float
        ``E1[l]``.
    phi : float
        Bound on ``|l|`` used by the overshoot and window quantizers.
    se_h0, se_h1 : float, optional (default 0)
        Monte Carlo standard errors of the KL estimates.
    """

    kl_h0: float = field(converter=float, validator=_positive)
    kl_h1: float = field(converter=float, validator=_positive)
    phi: float = field(converter=float, validator=_positive)
    se_h0: float = field(default=0.0, converter=float)
    se_h1: float = field(default=0.0, converter=float)

    def __attrs_post_init__(self):
        """Check that ``phi`` dominates both KL numbers."""
        if self.phi < max(self.kl_h0, self.kl_h1):
            raise ValueError(
                f"phi={self.phi} is smaller than the KL numbers "
                f"({self.kl_h0}, {self.kl_h1}); it cannot bound |l|."
            )

    def kl(self, source: str = "h1") -> float:
        """Select the KL number used for the level-triggered threshold.

        Parameters
        ----------
        source : {"h1", "h0", "mean"}, optional (default "h1")
            Which hypothesis' KL number to use.
        """
        if source == "h1":
            return self.kl_h1
        if source == "h0":
            return self.kl_h0
        if source == "mean":
            return (self.kl_h0 + self.kl_h1) / 2
        raise ValueError(f"Unknown KL source ``{source}``; expected h1, h0 or mean.")

    @classmethod
    def pooled(cls, constants: Iterable[ModelConstants]) -> ModelConstants:
        """Combine per-SU constants: average KL numbers, largest ``phi``."""
        items: List[ModelConstants] = list(constants)
        k = len(items)
        return cls(
            kl_h0=sum(c.kl_h0 for c in items) / k,
            kl_h1=sum(c.kl_h1 for c in items) / k,
            phi=max(c.phi for c in items),
            se_h0=math.sqrt(sum(c.se_h0**2 for c in items)) / k,
            se_h1=math.sqrt(sum(c.se_h1**2 for c in items)) / k,
        )


def estimate_constants(
    model: DetectorModel,
    n_samples: int = 100_000,
    quantile: float = 1e-4,
    rng: Optional[np.random.Generator] = None,
) -> ModelConstants:
    """Estimate the KL numbers and the LLR bound of a model by simulation.

    Parameters
    ----------
    model : DetectorModel
        The sensing model.
    n_samples : int, optional (default 100000)
        Samples drawn under each hypothesis.
    quantile : float, optional (default 1e-4)
        Tail probability for ``phi``: ``phi`` is the ``1 - quantile`` quantile
        of ``|l|`` pooled over both hypotheses.
    rng : numpy.random.Generator, optional
        The random stream. A fresh default generator is used if omitted.

    Returns
    -------
    ModelConstants
        The constants with Monte Carlo standard errors.

    Raises
    ------
    ValueError
        Raised for fewer than 100000 samples or a quantile outside ``(0, 1)``.
    IndistinguishableHypothesesError
        Raised if a KL estimate is within 3 standard errors of zero.
    """
    if n_samples < 100_000:
        raise ValueError(f"``n_samples`` must be at least 100000, got {n_samples}.")
    if not 0 < quantile < 1:
        raise ValueError(f"``quantile`` must lie in (0, 1), got {quantile}.")
    rng = np.random.default_rng() if rng is None else rng

    draws = {hyp: LlrStream(model, hyp).draw(n_samples, rng) for hyp in Hypothesis}
    kl, se = {}, {}
    for hyp, values in draws.items():
        kl[hyp] = abs(float(np.mean(values)))
        se[hyp] = float(np.std(values, ddof=1)) / math.sqrt(n_samples)
        if kl[hyp] <= 3 * se[hyp]:
            raise IndistinguishableHypothesesError(
                f"The mean LLR under {hyp.name} ({kl[hyp]:.3g}) is within 3 standard "
                f"errors ({se[hyp]:.3g}) of zero; the hypotheses cannot be distinguished."
            )
    phi = float(np.quantile(np.abs(np.concatenate(list(draws.values()))), 1 - quantile))
    LOG.debug(f"Constants for {model}: I0={kl[Hypothesis.H0]}, I1={kl[Hypothesis.H1]}, phi={phi}")

    return ModelConstants(
        kl_h0=kl[Hypothesis.H0],
        kl_h1=kl[Hypothesis.H1],
        phi=phi,
        se_h0=se[Hypothesis.H0],
        se_h1=se[Hypothesis.H1],
    )
