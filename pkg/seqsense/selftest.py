"""Checks against exact references.

Each check returns a :py:class:`CheckResult`; :py:func:`run_all` runs them
all and is what the ``selftest`` command reports.
"""

import logging
import math
from typing import ClassVar, List, Sequence, Tuple

import numpy as np
from attrs import field, frozen, validators
from scipy.stats import chisquare

from seqsense.detectors import DetectorModel, Hypothesis
from seqsense.fusion import Scheme, SchemeConfig, SprtThresholds
from seqsense.montecarlo import (
    estimate_error_direct,
    estimate_error_importance,
    mean_delay,
    simulate_trials,
)
from seqsense.sampling import local_sign_error_bound, quantizer_probability, sign_probability

LOG = logging.getLogger(__name__)

DOMINANCE_R_HATS: Tuple[int, ...] = (1, 2, 3, 7, 15)
# Standard errors a simulated quantity may stray from its exact value.
SE_TOLERANCE: float = 3.0


@frozen
class SymmetricWalk(DetectorModel):
    """Observations ``+-1`` whose LLR is ``+-step``.

    ``P1(+1) = 1 / (1 + exp(-step))`` and ``P0(+1) = 1 / (1 + exp(step))``.
    """

    kind: ClassVar[str] = "walk"
    step: float = field(default=1.0, converter=float, validator=validators.gt(0))

    def generate(self, hyp, size, rng, history=None):
        sign = 1.0 if hyp == Hypothesis.H1 else -1.0
        p_up = 1 / (1 + math.exp(-sign * self.step))
        return np.where(rng.random(size) < p_up, 1.0, -1.0)

    def llr(self, samples, history=None):
        return np.asarray(samples, dtype=float) * self.step


@frozen
class CheckResult:
    """Outcome of one check."""

    name: str
    passed: bool
    detail: str


def dominance_violations(
    n_grid: int = 1000,
    r_hats: Sequence[int] = DOMINANCE_R_HATS,
    phi: float = 1.0,
    delta: float = 1.0,
    slack: float = 1e-12,
) -> int:
    """Count grid points where the randomized quantizer breaks its likelihood-ratio bounds.

    For every overshoot ``q`` on a grid of ``[0, phi)``, and every ``r_hat``, the
    two-point expectation over the randomization must satisfy, in both exponent
    directions,

    * ``E[exp(delta + q_hat)] <= exp(delta + q)`` (up to relative ``slack``),
      which holds with equality for the chosen probability, and
    * ``E[exp(-(delta + q_hat))] <= exp(-(delta + q) + phi / r_hat)``. By
      Jensen's inequality the exact bound ``exp(-(delta + q))`` cannot hold
      at the same time as the first one off the lattice points.

    Returns
    -------
    int
        The number of violations.
    """
    violations = 0
    for r_hat in r_hats:
        eps = phi / r_hat
        for q in np.linspace(0.0, phi, n_grid, endpoint=False):
            m, p = quantizer_probability(float(q), r_hat, phi)
            if not 0.0 <= p <= 1.0:
                violations += 1
                continue
            low, high = delta + m * eps, delta + (m + 1) * eps
            upward = p * math.exp(low) + (1 - p) * math.exp(high)
            downward = p * math.exp(-low) + (1 - p) * math.exp(-high)
            if upward > math.exp(delta + q) * (1 + slack):
                violations += 1
            if downward > math.exp(-(delta + q) + eps) * (1 + slack):
                violations += 1
    return violations


@frozen
class WalkOracle:
    """Exact behaviour of the centralized SPRT on a :py:class:`SymmetricWalk`.

    Attributes
    ----------
    decide_h1, decide_h0, censored : float
        Outcome probabilities.
    stop_distribution : numpy.ndarray
        ``P(stop at t)`` for ``t = 1, ..., horizon``.
    mean_delay : float
        Mean stopping time, censored paths counting at the horizon.
    """

    decide_h1: float
    decide_h0: float
    censored: float
    stop_distribution: np.ndarray = field(eq=False)
    mean_delay: float


def walk_oracle(
    hyp: Hypothesis, a: int = 3, b: int = 3, horizon: int = 20, step: float = 1.0
) -> WalkOracle:
    """Enumerate all ``2 ** horizon`` sign paths of a walk with integer thresholds.

    Parameters
    ----------
    hyp : Hypothesis
        The hypothesis generating the steps.
    a, b : int, optional (default 3)
        Thresholds in units of ``step``.
    horizon : int, optional (default 20)
        Path length.
    step : float, optional (default 1)
        LLR per observation.

    Returns
    -------
    WalkOracle
        The exact outcome probabilities.
    """
    if horizon > 24:
        raise ValueError(f"Enumerating 2**{horizon} paths is not supported.")
    codes = np.arange(2**horizon, dtype=np.int64)
    ups = ((codes[:, None] >> np.arange(horizon)) & 1).astype(np.int8)
    position = np.cumsum(2 * ups - 1, axis=1, dtype=np.int16)
    sign = 1.0 if Hypothesis(hyp) == Hypothesis.H1 else -1.0
    log_up, log_down = -math.log1p(math.exp(-sign * step)), -math.log1p(math.exp(sign * step))
    n_up = ups.sum(axis=1)
    prob = np.exp(n_up * log_up + (horizon - n_up) * log_down)

    exit_up = position >= a
    exit_down = position <= -b
    exited = exit_up | exit_down
    stopped = exited.any(axis=1)
    first = np.where(stopped, exited.argmax(axis=1), horizon - 1)
    rows = np.arange(codes.size)
    up_decision = stopped & exit_up[rows, first]
    down_decision = stopped & ~exit_up[rows, first]

    stop_distribution = np.bincount(first[stopped], weights=prob[stopped], minlength=horizon)
    censored = float(prob[~stopped].sum())
    times = np.arange(1, horizon + 1)
    return WalkOracle(
        decide_h1=float(prob[up_decision].sum()),
        decide_h0=float(prob[down_decision].sum()),
        censored=censored,
        stop_distribution=stop_distribution,
        mean_delay=float((stop_distribution * times).sum() + censored * horizon),
    )


def _walk_trials(hyp, n_trials, seed, horizon, workers):
    return simulate_trials(
        SchemeConfig(Scheme.CENTRALIZED),
        [SymmetricWalk()],
        SprtThresholds(3, 3),
        hyp,
        n_trials,
        seed,
        horizon=horizon,
        workers=workers,
    )


def check_oracle_equivalence(
    n_trials: int = 100_000, seed: int = 0, horizon: int = 20, workers: int = 1
) -> CheckResult:
    """Compare simulated centralized SPRT outcomes on the walk with enumeration."""
    trials = _walk_trials(Hypothesis.H1, n_trials, seed, horizon, workers)
    oracle = walk_oracle(Hypothesis.H1, horizon=horizon)
    problems = []

    miss = estimate_error_direct(trials, Hypothesis.H1)
    decided = 1 - oracle.censored
    expected_miss = oracle.decide_h0 / decided
    miss_se = math.sqrt(expected_miss * (1 - expected_miss) / max(miss.n_used, 1))
    if abs(miss.value - expected_miss) > SE_TOLERANCE * miss_se:
        problems.append(f"miss {miss.value:.5f} vs {expected_miss:.5f}")

    delay, delay_se = mean_delay(trials)
    if abs(delay - oracle.mean_delay) > SE_TOLERANCE * delay_se:
        problems.append(f"delay {delay:.4f} vs {oracle.mean_delay:.4f}")

    stop_times = np.array([t.stop_time for t in trials if not t.censored])
    observed = np.bincount(stop_times - 1, minlength=horizon).astype(float)
    expected = oracle.stop_distribution / decided * observed.sum()
    keep = expected >= 5
    pvalue = chisquare(observed[keep], expected[keep] * observed[keep].sum() / expected[keep].sum()).pvalue
    if pvalue < 1e-3:
        problems.append(f"delay distribution p-value {pvalue:.2g}")

    return CheckResult(
        "oracle equivalence",
        not problems,
        "; ".join(problems) or f"miss={miss.value:.5f}, delay={delay:.4f}, p={pvalue:.3f}",
    )


def check_importance_sampling(
    n_trials: int = 100_000, seed: int = 0, horizon: int = 20, workers: int = 1
) -> CheckResult:
    """Compare the importance-sampled false-alarm probability with enumeration."""
    trials = _walk_trials(Hypothesis.H1, n_trials, seed, horizon, workers)
    estimate = estimate_error_importance(trials, Hypothesis.H1)
    # censored trials are left out of the weighted mean
    exact = walk_oracle(Hypothesis.H0, horizon=horizon).decide_h1 / (
        1 - walk_oracle(Hypothesis.H1, horizon=horizon).censored
    )
    passed = abs(estimate.value - exact) <= SE_TOLERANCE * estimate.se
    return CheckResult(
        "importance sampling",
        passed,
        f"alpha_is={estimate.value:.3e} +- {estimate.se:.1e}, exact={exact:.3e}",
    )


def check_dominance() -> CheckResult:
    """Run :py:func:`dominance_violations` on the default grid."""
    count = dominance_violations()
    return CheckResult("quantizer dominance", count == 0, f"{count} violations")


def check_sign_bits(n_messages: int = 20_000, seed: int = 0, delta: float = 2.5) -> CheckResult:
    """Check that positive messages under H0 stay within the local SPRT error bound.

    The input is a :py:class:`SymmetricWalk` with unit steps, so the SU behaves
    like a local SPRT with thresholds ``+-ceil(delta)``.
    """
    p0, se = sign_probability(
        SymmetricWalk(), delta, Hypothesis.H0, n_messages, np.random.default_rng(seed)
    )
    bound = local_sign_error_bound(delta)
    return CheckResult(
        "local sign bits",
        p0 <= bound + SE_TOLERANCE * se,
        f"P0(b=+1)={p0:.4f} +- {se:.1e}, bound={bound:.4f}",
    )


def run_all(n_trials: int = 100_000, seed: int = 0, workers: int = 1) -> List[CheckResult]:
    """Run every check."""
    results = [
        check_dominance(),
        check_oracle_equivalence(n_trials, seed, workers=workers),
        check_importance_sampling(n_trials, seed + 1, workers=workers),
        check_sign_bits(seed=seed + 2),
    ]
    for result in results:
        LOG.info(f"{result.name}: {'ok' if result.passed else 'FAILED'} ({result.detail})")
    return results
