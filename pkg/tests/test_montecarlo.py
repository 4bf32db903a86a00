"""Test trial batches, seeding and the estimators."""

import math

import numpy as np
import pytest

from seqsense.detectors import GaussianDetectorParams, Hypothesis
from seqsense.fusion import Scheme, SchemeConfig, SprtThresholds, TrialResult, Verdict
from seqsense.montecarlo import (
    Stream,
    censored_fraction,
    combined_se,
    estimate_error_direct,
    estimate_error_importance,
    mean_delay,
    message_rate,
    simulate_trials,
    trial_rng,
)
from tests.conftest import ConstantLlr

GAUSSIAN = GaussianDetectorParams(rho2=1.0, sigma_w2=1.0)


def _trial(decision, llr, stop_time=3, messages=6):
    return TrialResult(
        verdict=Verdict(decision, stop_time),
        stop_time=stop_time,
        message_count=messages,
        bits_sent=messages,
        centralized_llr_at_stop=llr,
        censored=decision is None,
    )


def test_trial_rng():
    """Test that trial streams depend only on the seed and the key."""
    first = trial_rng(3, Stream.EXPERIMENT, 1, 5).random(4)

    np.testing.assert_array_equal(first, trial_rng(3, Stream.EXPERIMENT, 1, 5).random(4))
    assert not np.array_equal(first, trial_rng(3, Stream.EXPERIMENT, 1, 6).random(4))
    assert not np.array_equal(first, trial_rng(4, Stream.EXPERIMENT, 1, 5).random(4))


def test_simulate_trials_independent_of_workers():
    """Test that the trial outcomes do not depend on the parallel layout."""
    scheme = SchemeConfig(Scheme.RLTSPRT, bits=2, delta=1.5, phi=8.0)
    kwargs = dict(
        scheme=scheme,
        models=[GAUSSIAN] * 2,
        thresholds=SprtThresholds(3, 3),
        hyp=Hypothesis.H1,
        n_trials=60,
        seed=11,
        key=(Stream.EXPERIMENT, 0),
    )
    serial = simulate_trials(**kwargs, workers=1, batch_size=60)
    parallel = simulate_trials(**kwargs, workers=2, batch_size=7)

    assert serial == parallel


def test_simulate_trials_invalid():
    """Test rejecting an empty batch."""
    with pytest.raises(ValueError):
        simulate_trials(
            SchemeConfig("centralized"), [GAUSSIAN], SprtThresholds(3, 3), Hypothesis.H1, 0, 0
        )


def test_mean_delay_constant_llr():
    """Test the mean delay of a deterministic walk."""
    trials = simulate_trials(
        SchemeConfig("centralized"), [ConstantLlr(1.0)], SprtThresholds(5, 5), Hypothesis.H1, 100, 0
    )

    assert mean_delay(trials) == (5.0, 0.0)
    assert message_rate(trials) == 1.0
    assert censored_fraction(trials) == 0.0


def test_importance_no_false_alarm():
    """Test that no H1 decision gives a zero false-alarm estimate."""
    trials = [_trial(Hypothesis.H0, -2.0) for _ in range(5)]
    estimate = estimate_error_importance(trials, Hypothesis.H1)

    assert estimate.value == 0.0
    assert estimate.se == 0.0
    assert estimate.n_used == 5


def test_importance_weights():
    """Test the change-of-measure weights in both directions."""
    trials = [_trial(Hypothesis.H1, 2.0), _trial(Hypothesis.H1, 3.0), _trial(Hypothesis.H0, -2.0)]
    alpha = estimate_error_importance(trials, Hypothesis.H1)

    assert alpha.value == pytest.approx((math.exp(-2.0) + math.exp(-3.0)) / 3)
    assert alpha.se == pytest.approx(
        np.std([math.exp(-2.0), math.exp(-3.0), 0.0], ddof=1) / math.sqrt(3)
    )

    trials = [_trial(Hypothesis.H0, -4.0), _trial(Hypothesis.H1, 1.0)]
    beta = estimate_error_importance(trials, Hypothesis.H0)

    assert beta.value == pytest.approx(math.exp(-4.0) / 2)


def test_estimators_exclude_censored():
    """Test that censored trials are left out and counted."""
    trials = [_trial(Hypothesis.H1, 2.0), _trial(None, 0.5, stop_time=10), _trial(Hypothesis.H0, -2.0)]
    importance = estimate_error_importance(trials, Hypothesis.H1)
    direct = estimate_error_direct(trials, Hypothesis.H0)

    assert importance.n_used == 2
    assert importance.n_censored == 1
    assert importance.value == pytest.approx(math.exp(-2.0) / 2)
    assert direct.value == 0.5
    assert direct.se == pytest.approx(0.5 / math.sqrt(2))
    assert censored_fraction(trials) == pytest.approx(1 / 3)
    assert mean_delay(trials)[0] == pytest.approx(16 / 3)


def test_direct_error_all_censored():
    """Test the direct estimate without any decision."""
    estimate = estimate_error_direct([_trial(None, 0.0)], Hypothesis.H1)

    assert math.isnan(estimate.value)
    assert estimate.n_censored == 1


def test_message_rate():
    """Test pooling messages over the total observation time."""
    trials = [_trial(Hypothesis.H1, 1.0, stop_time=2, messages=4), _trial(Hypothesis.H1, 1.0, stop_time=6, messages=4)]

    assert message_rate(trials) == 1.0


def test_combined_se():
    """Test combining standard errors."""
    first = estimate_error_direct([_trial(Hypothesis.H1, 1.0), _trial(Hypothesis.H0, -1.0)], Hypothesis.H1)

    assert combined_se(first, None, first) == pytest.approx(math.sqrt(2) * first.se)


@pytest.mark.slow
def test_importance_matches_direct():
    """Test that the importance and direct false-alarm estimates agree at alpha near 1e-2."""
    scheme = SchemeConfig("centralized")
    thresholds = SprtThresholds(abs(math.log(1e-2)), abs(math.log(1e-2)))
    models = [GAUSSIAN] * 2
    under_h1 = simulate_trials(scheme, models, thresholds, Hypothesis.H1, 10_000, 0, key=(0,))
    under_h0 = simulate_trials(scheme, models, thresholds, Hypothesis.H0, 10_000, 0, key=(0,))
    importance = estimate_error_importance(under_h1, Hypothesis.H1)
    direct = estimate_error_direct(under_h0, Hypothesis.H0)

    assert abs(importance.value - direct.value) <= 3 * combined_se(importance, direct)
    assert importance.value <= 1e-2


@pytest.mark.slow
def test_importance_small_error():
    """Test the relative precision of the importance estimate at alpha near 1e-6."""
    thresholds = SprtThresholds(abs(math.log(1e-6)), abs(math.log(1e-6)))
    trials = simulate_trials(
        SchemeConfig("centralized"), [GAUSSIAN] * 2, thresholds, Hypothesis.H1, 10_000, 0
    )
    estimate = estimate_error_importance(trials, Hypothesis.H1)

    assert 0 < estimate.value <= 1e-6
    assert estimate.se / estimate.value < 0.1
