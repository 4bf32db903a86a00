"""Trial batches, counter-based seeding and error/delay estimators."""

import logging
import math
from enum import IntEnum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from attrs import frozen
from joblib import Parallel, delayed

from seqsense.detectors import DetectorModel, Hypothesis
from seqsense.fusion import DEFAULT_HORIZON, SchemeConfig, SprtThresholds, TrialResult, run_scheme

LOG = logging.getLogger(__name__)

# Decision codes used by the array-level estimators.
CENSORED: int = -1


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Random stream for one trial, derived from the master seed and a counter key.

    Parameters
    ----------
    seed : int
        The master seed.
    *key : int
        Counters identifying the trial, e.g. ``(stream, hypothesis, index)``.

    Returns
    -------
    numpy.random.Generator
        A generator that depends only on ``seed`` and ``key``.
    """
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    )


def _run_batch(scheme, models, thresholds, hyp, seed, key, indices, horizon, record):
    return [
        run_scheme(
            scheme,
            models,
            thresholds,
            hyp,
            horizon=horizon,
            rng=trial_rng(seed, *key, int(hyp), i),
            record=record,
        )
        for i in indices
    ]


def simulate_trials(
    scheme: SchemeConfig,
    models: Sequence[DetectorModel],
    thresholds: SprtThresholds,
    hyp: Hypothesis,
    n_trials: int,
    seed: int,
    key: Tuple[int, ...] = (),
    horizon: int = DEFAULT_HORIZON,
    record: bool = False,
    workers: int = 1,
    batch_size: int = 500,
) -> List[TrialResult]:
    """Run ``n_trials`` independent trials, in trial-index order.

    Trial ``i`` uses :py:func:`trial_rng` with key ``(*key, hyp, i)``, so the
    results do not depend on ``workers`` or on the batch layout.

    Parameters
    ----------
    scheme : SchemeConfig
        The resolved scheme.
    models : sequence of DetectorModel
        One model per SU.
    thresholds : SprtThresholds
        FC thresholds.
    hyp : Hypothesis
        The true hypothesis.
    n_trials : int
        Number of trials.
    seed : int
        Master seed.
    key : tuple of int, optional (default ())
        Counter prefix separating independent streams of the same seed.
    horizon : int, optional (default 1000000)
        Horizon per trial.
    record : bool, optional (default False)
        Attach FC traces to the results.
    workers : int, optional (default 1)
        Number of ``joblib`` workers.
    batch_size : int, optional (default 500)
        Trials per dispatched job.

    Returns
    -------
    list of TrialResult
        One result per trial.
    """
    if n_trials < 1:
        raise ValueError(f"``n_trials`` must be at least 1, got {n_trials}.")
    hyp = Hypothesis(hyp)
    batches = [range(i, min(i + batch_size, n_trials)) for i in range(0, n_trials, batch_size)]
    LOG.debug(f"Running {n_trials} {scheme.label} trials under {hyp.name} on {workers} worker(s)")
    chunks = Parallel(n_jobs=workers)(
        delayed(_run_batch)(scheme, models, thresholds, hyp, seed, key, batch, horizon, record)
        for batch in batches
    )
    return [result for chunk in chunks for result in chunk]


@frozen
class ErrorEstimate:
    """An error-probability estimate.

    Parameters
    ----------
    value : float
        The estimate.
    se : float
        Its standard error.
    n_used : int
        Trials entering the estimate.
    n_censored : int
        Censored trials left out.
    """

    value: float
    se: float
    n_used: int
    n_censored: int = 0


def _mean_and_se(values: np.ndarray) -> Tuple[float, float]:
    n = values.size
    if n == 0:
        return math.nan, math.nan
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    return mean, se


def decision_codes(trials: Sequence[TrialResult]) -> np.ndarray:
    """Decisions as integers; ``CENSORED`` for trials without a decision."""
    return np.array(
        [CENSORED if t.censored else int(t.decision) for t in trials], dtype=int
    )


def importance_error(
    decisions: np.ndarray, reference: np.ndarray, generated_under: Hypothesis
) -> ErrorEstimate:
    """Change-of-measure error estimate from arrays of decisions and exact LLRs.

    Trials generated under H1 estimate ``P0(decide H1)`` with weights
    ``exp(-L)``; trials generated under H0 estimate ``P1(decide H0)`` with
    weights ``exp(+L)``.
    """
    generated_under = Hypothesis(generated_under)
    valid = decisions != CENSORED
    sign = -1.0 if generated_under == Hypothesis.H1 else 1.0
    hits = decisions[valid] == int(generated_under)
    weights = np.where(hits, np.exp(sign * reference[valid]), 0.0)
    value, se = _mean_and_se(weights)
    return ErrorEstimate(value, se, int(valid.sum()), int((~valid).sum()))


def direct_error(decisions: np.ndarray, generated_under: Hypothesis) -> ErrorEstimate:
    """Fraction of wrong decisions among uncensored trials, with binomial SE."""
    generated_under = Hypothesis(generated_under)
    valid = decisions != CENSORED
    n = int(valid.sum())
    if n == 0:
        return ErrorEstimate(math.nan, math.nan, 0, int((~valid).sum()))
    p = float(np.mean(decisions[valid] == int(generated_under.opposite)))
    return ErrorEstimate(p, math.sqrt(p * (1 - p) / n), n, int((~valid).sum()))


def estimate_error_importance(
    trials: Sequence[TrialResult], generated_under: Hypothesis = Hypothesis.H1
) -> ErrorEstimate:
    """Estimate the error probability of the opposite hypothesis by importance sampling.

    Parameters
    ----------
    trials : sequence of TrialResult
        Trials generated under ``generated_under``.
    generated_under : Hypothesis, optional (default H1)
        With H1 the estimate is the false-alarm probability ``P0(decide H1)``;
        with H0 it is the misdetection probability ``P1(decide H0)``.

    Returns
    -------
    ErrorEstimate
        Estimate and SE of the weighted mean. Censored trials are excluded and
        counted.
    """
    reference = np.array([t.centralized_llr_at_stop for t in trials], dtype=float)
    return importance_error(decision_codes(trials), reference, generated_under)


def estimate_error_direct(
    trials: Sequence[TrialResult], generated_under: Hypothesis
) -> ErrorEstimate:
    """Estimate the error probability under ``generated_under`` by counting."""
    return direct_error(decision_codes(trials), generated_under)


def mean_delay(trials: Sequence[TrialResult]) -> Tuple[float, float]:
    """Mean stopping time and its SE; censored trials count at the horizon."""
    return _mean_and_se(np.array([t.stop_time for t in trials], dtype=float))


def censored_fraction(trials: Sequence[TrialResult]) -> float:
    """Fraction of trials that hit the horizon."""
    return sum(t.censored for t in trials) / len(trials)


def message_rate(trials: Sequence[TrialResult]) -> float:
    """Messages received by the FC per unit time, pooled over trials."""
    total_time = sum(t.stop_time for t in trials)
    return sum(t.message_count for t in trials) / total_time if total_time else 0.0


def combined_se(*estimates: Optional[ErrorEstimate]) -> float:
    """Root-sum-square of standard errors."""
    return math.sqrt(sum(e.se**2 for e in estimates if e is not None))


class Stream(IntEnum):
    """Leading counter of every trial key; separates the random streams of one seed."""

    CONSTANTS = 0
    CALIBRATION = 1
    MESSAGE_RATE = 2
    EXPERIMENT = 3
