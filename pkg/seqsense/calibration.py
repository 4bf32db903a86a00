"""Parameter matching and threshold calibration.

The level-triggered threshold ``delta`` is matched to the uniform period so
that both decentralized schemes send messages at about the same average rate.
FC thresholds are found by simulation: every calibration trial is recorded
once with wide thresholds and the bisection over ``(a, b)`` replays the
recorded FC statistic, so all iterates see the same random numbers.
"""

from __future__ import annotations

import json
import logging
import math
import zlib
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from attrs import evolve, field, frozen
from scipy.optimize import brentq

from seqsense.detectors import DetectorModel, Hypothesis, LlrStream, ModelConstants, estimate_constants
from seqsense.fusion import (
    DEFAULT_HORIZON,
    Scheme,
    SchemeConfig,
    SprtThresholds,
    TrialResult,
)
from seqsense.montecarlo import (
    CENSORED,
    ErrorEstimate,
    Stream,
    direct_error,
    importance_error,
    simulate_trials,
    trial_rng,
)
from seqsense.sampling import BitBudget, LtSamplerState, lt_step

LOG = logging.getLogger(__name__)

MIN_CALIBRATION_TRIALS: int = 10_000
ESTIMATORS: Tuple[str, ...] = ("importance", "direct")


def solve_delta(t_period: int, kl: float) -> float:
    """Level-triggered threshold matched to a uniform sampling period.

    Solves ``delta * tanh(delta / 2) = t_period * kl``. The left-hand side
    increases strictly from zero, so the root is unique.

    Parameters
    ----------
    t_period : int
        The uniform sampling period ``T``.
    kl : float
        The per-SU KL number.

    Returns
    -------
    float
        The threshold; ``0`` when ``t_period * kl`` is zero.
    """
    target = t_period * kl
    if target < 0:
        raise ValueError(f"``t_period * kl`` must be nonnegative, got {target}.")
    if target == 0:
        return 0.0

    def residual(delta: float) -> float:
        return delta * math.tanh(delta / 2) - target

    # Since tanh(x / 2) > 1 - 2 exp(-x), the residual is positive at target + 2.
    return float(brentq(residual, 0.0, target + 2.0, xtol=1e-13, rtol=4 * np.finfo(float).eps))


def bits_to_levels(budget: Union[BitBudget, int]) -> Tuple[int, int]:
    """Quantizer sizes ``(r_tilde, r_hat)`` for a per-message bit budget."""
    if not isinstance(budget, BitBudget):
        budget = BitBudget(budget)
    return budget.r_tilde, budget.r_hat


def error_information(x: float, y: float) -> float:
    """``x log(x / (1 - y)) + (1 - x) log((1 - x) / y)``."""
    return x * math.log(x / (1 - y)) + (1 - x) * math.log((1 - x) / y)


def delay_lower_bound(
    alpha: float,
    beta: float,
    kl: float,
    k_users: int,
    hyp: Hypothesis = Hypothesis.H1,
) -> float:
    """Smallest mean delay any test with error probabilities ``(alpha, beta)`` can have.

    Parameters
    ----------
    alpha, beta : float
        False-alarm and misdetection probabilities, positive with sum below 1.
    kl : float
        The per-SU KL number under ``hyp``.
    k_users : int
        Number of SUs.
    hyp : Hypothesis, optional (default H1)
        The hypothesis the delay is measured under.

    Returns
    -------
    float
        The bound.
    """
    if not (alpha > 0 and beta > 0 and alpha + beta < 1):
        raise ValueError(f"Need 0 < alpha, beta and alpha + beta < 1, got ({alpha}, {beta}).")
    if kl <= 0 or k_users < 1:
        raise ValueError(f"Need kl > 0 and k_users >= 1, got kl={kl}, k_users={k_users}.")
    if Hypothesis(hyp) == Hypothesis.H1:
        info = error_information(beta, alpha)
    else:
        info = error_information(alpha, beta)

    return info / (k_users * kl)


def wald_thresholds(alpha: float, beta: float) -> SprtThresholds:
    """Thresholds ``(|log alpha|, |log beta|)``."""
    return SprtThresholds(abs(math.log(alpha)), abs(math.log(beta)))


def model_stream_key(model: DetectorModel) -> int:
    """Counter key of a model's constant-estimation stream, derived from its parameters."""
    return zlib.crc32(json.dumps(model.to_dict(), sort_keys=True).encode("utf-8"))


def pooled_constants(
    models: Sequence[DetectorModel],
    n_samples: int = 100_000,
    quantile: float = 1e-4,
    seed: int = 0,
) -> ModelConstants:
    """Estimate constants once per distinct model and pool them over SUs.

    Each distinct model draws from its own stream keyed by
    :py:func:`model_stream_key`, so its estimate does not depend on the
    other SUs.

    Parameters
    ----------
    models : sequence of DetectorModel
        One model per SU.
    n_samples : int, optional (default 100000)
        Samples per hypothesis and model.
    quantile : float, optional (default 1e-4)
        Tail probability for ``phi``.
    seed : int, optional (default 0)
        Master seed.

    Returns
    -------
    ModelConstants
        KL numbers averaged over SUs and the largest per-SU ``phi``.
    """
    cache: Dict[DetectorModel, ModelConstants] = {}
    for model in models:
        if model not in cache:
            rng = trial_rng(seed, Stream.CONSTANTS, model_stream_key(model))
            cache[model] = estimate_constants(model, n_samples, quantile, rng)
        else:
            LOG.debug(f"Reusing constants for {model}")
    return ModelConstants.pooled(cache[model] for model in models)


def resolve_scheme(
    scheme: SchemeConfig, constants: ModelConstants, kl_source: str = "h1"
) -> SchemeConfig:
    """Fill in ``phi`` and, for RLT-SPRT, ``delta`` from the model constants."""
    if scheme.kind is Scheme.CENTRALIZED:
        return scheme
    phi = constants.phi if scheme.phi is None else scheme.phi
    delta = scheme.delta
    if scheme.kind is Scheme.RLTSPRT and delta is None:
        delta = solve_delta(scheme.period, constants.kl(kl_source))
    return evolve(scheme, phi=phi, delta=delta)


def measure_message_rate(
    models: Sequence[DetectorModel],
    delta: float,
    phi: float,
    r_hat: int = 0,
    hyp: Hypothesis = Hypothesis.H1,
    horizon: int = 100_000,
    rng: Optional[np.random.Generator] = None,
    block_size: int = 4096,
) -> float:
    """Long-run number of level-triggered messages per unit time, summed over SUs.

    Only the samplers run; there is no fusion center and no stopping.

    Parameters
    ----------
    models : sequence of DetectorModel
        One model per SU.
    delta, phi, r_hat
        Sampler parameters.
    hyp : Hypothesis, optional (default H1)
        The hypothesis generating the observations.
    horizon : int, optional (default 100000)
        Number of time steps.
    rng : numpy.random.Generator, optional
        The random stream.
    block_size : int, optional (default 4096)
        Observations drawn per SU at a time.

    Returns
    -------
    float
        Messages per unit time.
    """
    rng = np.random.default_rng() if rng is None else rng
    count = 0
    for k, model in enumerate(models):
        stream = LlrStream(model, hyp)
        sampler = LtSamplerState(delta=delta, phi=phi, r_hat=r_hat, su_id=k)
        t = 0
        while t < horizon:
            for l_t in stream.draw(min(block_size, horizon - t), rng).tolist():
                t += 1
                if lt_step(sampler, l_t, t, rng) is not None:
                    count += 1
    return count / horizon


def scheme_message_rates(
    scheme: SchemeConfig,
    models: Sequence[DetectorModel],
    seed: int = 0,
    horizon: int = 100_000,
) -> Tuple[float, float]:
    """Message rates ``(H0, H1)`` of a resolved scheme.

    The centralized and uniform schemes send at fixed rates ``K`` and ``K / T``.
    """
    k_users = len(models)
    if scheme.kind is Scheme.CENTRALIZED:
        return float(k_users), float(k_users)
    if scheme.kind is Scheme.QSPRT:
        return k_users / scheme.period, k_users / scheme.period
    return tuple(  # type: ignore[return-value]
        measure_message_rate(
            models,
            scheme.delta,
            scheme.phi,
            scheme.budget.r_hat,
            hyp,
            horizon,
            trial_rng(seed, Stream.MESSAGE_RATE, int(hyp)),
        )
        for hyp in Hypothesis
    )


@frozen(eq=False)
class ReplayOutcome:
    """Per-trial outcomes of a :py:class:`TraceBank` under one pair of thresholds."""

    decisions: np.ndarray
    stop_times: np.ndarray
    reference: np.ndarray
    messages: np.ndarray

    def error(self, generated_under: Hypothesis, estimator: str = "importance") -> ErrorEstimate:
        """Error estimate for the other hypothesis (importance) or this one (direct)."""
        if estimator == "importance":
            return importance_error(self.decisions, self.reference, generated_under)
        return direct_error(self.decisions, generated_under)

    @property
    def mean_delay(self) -> float:
        """Mean stopping time; censored trials count at the horizon."""
        return float(np.mean(self.stop_times))


class TraceBank:
    """Recorded FC traces of many trials, replayable under any inner thresholds.

    The traces are concatenated into flat arrays. The running maximum of the
    FC statistic and of its negation make the first exit through either
    threshold a per-segment count, so a replay costs a few vectorized passes.

    Parameters
    ----------
    results : sequence of TrialResult
        Results recorded with ``record=True`` and identical thresholds.
    """

    def __init__(self, results: Sequence[TrialResult]):
        traces = [result.trace for result in results]
        if not traces or any(trace is None for trace in traces):
            raise ValueError("Every result needs a recorded trace.")
        self.outer: SprtThresholds = traces[0].thresholds
        self.horizon: int = traces[0].horizon
        self.n_trials: int = len(traces)

        lengths = np.array([len(trace.llr) for trace in traces], dtype=int)
        self._rows = np.flatnonzero(lengths > 0)
        self._lengths = lengths[self._rows]
        self._starts = np.concatenate([[0], np.cumsum(self._lengths)[:-1]]).astype(int)

        kept = [traces[i] for i in self._rows]
        llr = [np.asarray(trace.llr, dtype=float) for trace in kept]
        self._up = np.concatenate([np.maximum.accumulate(x) for x in llr]) if llr else np.empty(0)
        self._down = np.concatenate([np.maximum.accumulate(-x) for x in llr]) if llr else np.empty(0)
        self._times = np.concatenate([trace.times for trace in kept]) if kept else np.empty(0, int)
        self._reference = (
            np.concatenate([trace.reference for trace in kept]) if kept else np.empty(0)
        )
        self._messages = np.concatenate([trace.messages for trace in kept]) if kept else np.empty(0, int)
        flat = np.concatenate(llr) if llr else np.empty(0)
        self.upper_levels = np.unique(flat)
        self.lower_levels = np.unique(-flat)

        finals = [trace.final or (math.nan, 0, 0) for trace in traces]
        self._final_reference = np.array([f[0] for f in finals], dtype=float)
        self._final_messages = np.array([f[1] for f in finals], dtype=int)

    def _first_hit(self, running: np.ndarray, level: float) -> np.ndarray:
        counts = np.add.reduceat((running >= level).astype(int), self._starts)
        first = self._starts + self._lengths - counts
        return np.where(counts > 0, first, np.iinfo(np.int64).max)

    def replay(self, thresholds: SprtThresholds) -> ReplayOutcome:
        """Outcomes of all trials under ``thresholds``.

        Raises
        ------
        ValueError
            Raised when ``thresholds`` are wider than the recorded ones.
        """
        if thresholds.a > self.outer.a or thresholds.b > self.outer.b:
            raise ValueError(f"Cannot replay {thresholds} on traces recorded with {self.outer}.")
        decisions = np.full(self.n_trials, CENSORED, dtype=int)
        stop_times = np.full(self.n_trials, self.horizon, dtype=int)
        reference = self._final_reference.copy()
        messages = self._final_messages.copy()
        if self._rows.size:
            upper = self._first_hit(self._up, thresholds.a)
            lower = self._first_hit(self._down, thresholds.b)
            index = np.minimum(upper, lower)
            stopped = index < np.iinfo(np.int64).max
            rows = self._rows[stopped]
            index = index[stopped]
            decisions[rows] = np.where(upper[stopped] < lower[stopped], 1, 0)
            stop_times[rows] = self._times[index]
            reference[rows] = self._reference[index]
            messages[rows] = self._messages[index]

        return ReplayOutcome(decisions, stop_times, reference, messages)

    def levels(self, upper: bool = True) -> np.ndarray:
        """Sorted distinct values of the statistic (upper) or of its negation (lower)."""
        return self.upper_levels if upper else self.lower_levels


def _bisect(
    measure: Callable[[float], float],
    target: float,
    start: float,
    upper_bound: float,
    levels: np.ndarray,
    tolerance: float,
    decreasing: bool = True,
    max_iter: int = 200,
) -> Tuple[float, bool]:
    """Find a threshold whose measured value is within ``tolerance`` of ``target``.

    ``levels`` are the sorted values the recorded statistic visits. Once at
    most one of them lies in ``[lo, hi)`` the bracket spans two adjacent
    cells of equivalent thresholds and cannot shrink further. Returns the
    threshold and whether the search ended on such an achievability gap.
    """

    def close(value: float) -> bool:
        return abs(value - target) <= tolerance * target

    def below(value: float) -> bool:
        # the threshold is too small for the target
        return value > target if decreasing else value < target

    value = measure(start)
    LOG.debug(f"Bisection start at {start}: {value} (target {target})")
    if close(value):
        return start, False
    if below(value):
        lo, hi = start, upper_bound
        if below(measure(hi)):
            LOG.warning(
                f"Target {target} is not reached within the recorded band {upper_bound}; "
                "use more trials or a wider band."
            )
            return hi, True
    else:
        lo, hi = start * 1e-6, start

    for _ in range(max_iter):
        if np.searchsorted(levels, hi) - np.searchsorted(levels, lo) <= 1:
            value = measure(hi)
            return hi, not close(value)
        mid = (lo + hi) / 2
        value = measure(mid)
        LOG.debug(f"Bisection iterate {mid}: {value}")
        if close(value):
            return mid, False
        if below(value):
            lo = mid
        else:
            hi = mid
    return hi, False


@frozen
class CalibrationResult:
    """A calibrated scheme.

    Parameters
    ----------
    scheme : SchemeConfig
        The scheme with ``delta`` and ``phi`` resolved.
    thresholds : SprtThresholds
        The calibrated FC thresholds.
    constants : ModelConstants
        The pooled model constants used.
    achieved_alpha, achieved_beta : ErrorEstimate
        Error probabilities achieved on the calibration trials.
    message_rate : tuple of float
        Long-run messages per unit time under H0 and H1.
    mean_delays : tuple of float
        Mean delays under H0 and H1 on the calibration trials.
    gap_alpha, gap_beta : bool
        Whether the error target fell into an achievability gap.
    target_alpha, target_beta : float
        The requested error probabilities, ``nan`` when calibrated to delays.
    target_delays : tuple of float, optional
        The requested mean delays under H0 and H1.
    """

    scheme: SchemeConfig
    thresholds: SprtThresholds
    constants: ModelConstants
    achieved_alpha: ErrorEstimate
    achieved_beta: ErrorEstimate
    message_rate: Tuple[float, float]
    mean_delays: Tuple[float, float]
    gap_alpha: bool = False
    gap_beta: bool = False
    target_alpha: float = math.nan
    target_beta: float = math.nan
    target_delays: Optional[Tuple[float, float]] = field(default=None)

    @property
    def delta(self) -> Optional[float]:
        """The level-triggered threshold, if any."""
        return self.scheme.delta


def _largest_jump(scheme: SchemeConfig, constants: ModelConstants, k_users: int) -> float:
    if scheme.kind is Scheme.CENTRALIZED:
        return k_users * constants.phi
    if scheme.kind is Scheme.QSPRT:
        return k_users * scheme.period * scheme.phi
    return scheme.delta + scheme.phi


def _record(scheme, models, outer, n_trials, seed, horizon, workers):
    return {
        hyp: TraceBank(
            simulate_trials(
                scheme,
                models,
                outer,
                hyp,
                n_trials,
                seed,
                key=(Stream.CALIBRATION,),
                horizon=horizon,
                record=True,
                workers=workers,
            )
        )
        for hyp in Hypothesis
    }


def _check_common(n_trials: int, estimator: str, rounds: int):
    if n_trials < MIN_CALIBRATION_TRIALS:
        raise ValueError(
            f"Calibration needs at least {MIN_CALIBRATION_TRIALS} trials, got {n_trials}."
        )
    if estimator not in ESTIMATORS:
        raise ValueError(f"Unknown estimator ``{estimator}``; expected one of {ESTIMATORS}.")
    if rounds < 1:
        raise ValueError(f"``rounds`` must be at least 1, got {rounds}.")


def _union_levels(banks, upper: bool) -> np.ndarray:
    return np.union1d(banks[Hypothesis.H0].levels(upper), banks[Hypothesis.H1].levels(upper))


def _errors(banks, thresholds, estimator) -> Tuple[ErrorEstimate, ErrorEstimate]:
    """``(alpha, beta)`` of the recorded trials under ``thresholds``."""
    if estimator == "importance":
        alpha = banks[Hypothesis.H1].replay(thresholds).error(Hypothesis.H1, estimator)
        beta = banks[Hypothesis.H0].replay(thresholds).error(Hypothesis.H0, estimator)
    else:
        alpha = banks[Hypothesis.H0].replay(thresholds).error(Hypothesis.H0, estimator)
        beta = banks[Hypothesis.H1].replay(thresholds).error(Hypothesis.H1, estimator)
    return alpha, beta


def calibrate_thresholds(
    scheme: SchemeConfig,
    models: Sequence[DetectorModel],
    target_alpha: float,
    target_beta: float,
    n_trials: int = MIN_CALIBRATION_TRIALS,
    seed: int = 0,
    *,
    constants: Optional[ModelConstants] = None,
    estimator: str = "importance",
    kl_source: str = "h1",
    tolerance: float = 0.1,
    rounds: int = 3,
    horizon: int = DEFAULT_HORIZON,
    workers: int = 1,
) -> CalibrationResult:
    """Find FC thresholds that achieve target error probabilities.

    The search starts from ``(|log alpha|, |log beta|)`` and alternates a
    bisection on ``a`` (matching ``alpha``) with one on ``b`` (matching
    ``beta``). A bisection ends when the achieved error is within
    ``tolerance`` of its target, or when the bracketing thresholds are separated
    by a single visited value of the FC statistic. In the latter case the target lies in
    an achievability gap of the finite-bit statistic and the upper threshold,
    whose error does not exceed the target, is kept.

    Parameters
    ----------
    scheme : SchemeConfig
        The scheme; ``delta``/``phi`` are resolved when missing.
    models : sequence of DetectorModel
        One model per SU.
    target_alpha, target_beta : float
        Target false-alarm and misdetection probabilities.
    n_trials : int, optional (default 10000)
        Calibration trials per hypothesis.
    seed : int, optional (default 0)
        Master seed.
    constants : ModelConstants, optional
        Pooled model constants; estimated from ``models`` when omitted.
    estimator : {"importance", "direct"}, optional (default "importance")
        Error estimator driving the search.
    kl_source : {"h1", "h0", "mean"}, optional (default "h1")
        KL number used to match ``delta`` to the period.
    tolerance : float, optional (default 0.1)
        Relative tolerance on the achieved errors.
    rounds : int, optional (default 3)
        Maximum number of alternating passes.
    horizon : int, optional (default 1000000)
        Horizon of the calibration trials.
    workers : int, optional (default 1)
        Number of ``joblib`` workers.

    Returns
    -------
    CalibrationResult
        The calibrated scheme.
    """
    if not (target_alpha > 0 and target_beta > 0 and target_alpha + target_beta < 1):
        raise ValueError(
            f"Need positive targets with alpha + beta < 1, got ({target_alpha}, {target_beta})."
        )
    _check_common(n_trials, estimator, rounds)
    constants = pooled_constants(models, seed=seed) if constants is None else constants
    scheme = resolve_scheme(scheme, constants, kl_source)
    k_users = len(models)

    start = wald_thresholds(target_alpha, target_beta)
    jump = _largest_jump(scheme, constants, k_users)
    outer = SprtThresholds(2 * start.a + 2 * jump, 2 * start.b + 2 * jump)
    LOG.debug(f"Recording {scheme.label} calibration trials with {outer}")
    banks = _record(scheme, models, outer, n_trials, seed, horizon, workers)

    upper_levels, lower_levels = _union_levels(banks, True), _union_levels(banks, False)
    a, b = start.a, start.b
    gap_a = gap_b = False
    for round_ in range(rounds):
        a, gap_a = _bisect(
            lambda x: _errors(banks, SprtThresholds(x, b), estimator)[0].value,
            target_alpha,
            a,
            outer.a,
            upper_levels,
            tolerance,
        )
        b, gap_b = _bisect(
            lambda y: _errors(banks, SprtThresholds(a, y), estimator)[1].value,
            target_beta,
            b,
            outer.b,
            lower_levels,
            tolerance,
        )
        alpha, beta = _errors(banks, SprtThresholds(a, b), estimator)
        LOG.debug(f"Round {round_}: a={a}, b={b}, alpha={alpha.value}, beta={beta.value}")
        if (gap_a or abs(alpha.value - target_alpha) <= tolerance * target_alpha) and (
            gap_b or abs(beta.value - target_beta) <= tolerance * target_beta
        ):
            break

    thresholds = SprtThresholds(a, b)
    if gap_a or gap_b:
        LOG.warning(
            f"{scheme.label}: targets ({target_alpha}, {target_beta}) fall into an "
            f"achievability gap; achieved ({alpha.value:.3g}, {beta.value:.3g})."
        )
    result = CalibrationResult(
        scheme=scheme,
        thresholds=thresholds,
        constants=constants,
        achieved_alpha=alpha,
        achieved_beta=beta,
        message_rate=scheme_message_rates(scheme, models, seed),
        mean_delays=tuple(banks[hyp].replay(thresholds).mean_delay for hyp in Hypothesis),  # type: ignore[arg-type]
        gap_alpha=gap_a,
        gap_beta=gap_b,
        target_alpha=target_alpha,
        target_beta=target_beta,
    )
    LOG.info(f"Calibrated {scheme.label}: {thresholds}, alpha={alpha.value:.3g}, beta={beta.value:.3g}")

    return result


def calibrate_delays(
    scheme: SchemeConfig,
    models: Sequence[DetectorModel],
    target_delays: Tuple[float, float],
    n_trials: int = MIN_CALIBRATION_TRIALS,
    seed: int = 0,
    *,
    constants: Optional[ModelConstants] = None,
    estimator: str = "importance",
    kl_source: str = "h1",
    tolerance: float = 0.01,
    rounds: int = 3,
    horizon: int = DEFAULT_HORIZON,
    workers: int = 1,
) -> CalibrationResult:
    """Find FC thresholds that achieve target mean delays ``(E0[T], E1[T])``.

    Used for operating-characteristic comparisons, where every scheme is run
    at the same pair of mean delays. The mean delay under H1 grows with ``a``
    and the one under H0 with ``b`` path by path, so the same replay
    bisection as :py:func:`calibrate_thresholds` applies.

    Parameters
    ----------
    target_delays : tuple of float
        Target mean delays under H0 and H1.

    See :py:func:`calibrate_thresholds` for the remaining parameters.
    """
    delay_h0, delay_h1 = target_delays
    if delay_h0 < 1 or delay_h1 < 1:
        raise ValueError(f"Target delays must be at least 1, got {target_delays}.")
    _check_common(n_trials, estimator, rounds)
    constants = pooled_constants(models, seed=seed) if constants is None else constants
    scheme = resolve_scheme(scheme, constants, kl_source)
    k_users = len(models)

    start = SprtThresholds(k_users * constants.kl_h1 * delay_h1, k_users * constants.kl_h0 * delay_h0)
    jump = _largest_jump(scheme, constants, k_users)
    outer = SprtThresholds(2 * start.a + 2 * jump, 2 * start.b + 2 * jump)
    banks = _record(scheme, models, outer, n_trials, seed, horizon, workers)

    a, b = start.a, start.b
    for _ in range(rounds):
        a, _gap = _bisect(
            lambda x: banks[Hypothesis.H1].replay(SprtThresholds(x, b)).mean_delay,
            delay_h1,
            a,
            outer.a,
            banks[Hypothesis.H1].levels(upper=True),
            tolerance,
            decreasing=False,
        )
        b, _gap = _bisect(
            lambda y: banks[Hypothesis.H0].replay(SprtThresholds(a, y)).mean_delay,
            delay_h0,
            b,
            outer.b,
            banks[Hypothesis.H0].levels(upper=False),
            tolerance,
            decreasing=False,
        )
        delays = tuple(banks[hyp].replay(SprtThresholds(a, b)).mean_delay for hyp in Hypothesis)
        if all(abs(d - e) <= tolerance * e for d, e in zip(delays, target_delays)):
            break

    thresholds = SprtThresholds(a, b)
    alpha, beta = _errors(banks, thresholds, estimator)
    LOG.info(
        f"Delay-matched {scheme.label}: {thresholds}, delays={delays}, "
        f"alpha={alpha.value:.3g}, beta={beta.value:.3g}"
    )
    return CalibrationResult(
        scheme=scheme,
        thresholds=thresholds,
        constants=constants,
        achieved_alpha=alpha,
        achieved_beta=beta,
        message_rate=scheme_message_rates(scheme, models, seed),
        mean_delays=delays,  # type: ignore[arg-type]
        target_delays=(float(delay_h0), float(delay_h1)),
    )
