"""Test the fusion center and the single-trial driver."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqsense.detectors import GaussianDetectorParams, Hypothesis
from seqsense.fusion import (
    RAW_SAMPLE_BITS,
    FusionState,
    Scheme,
    SchemeConfig,
    SprtThresholds,
    TrialResult,
    Verdict,
    centralized_step,
    qsprt_step,
    replay_trace,
    rlt_step,
    run_scheme,
)
from seqsense.montecarlo import trial_rng
from seqsense.sampling import SuMessage
from tests.conftest import ConstantLlr

GAUSSIAN = GaussianDetectorParams(rho2=1.0, sigma_w2=1.0)


def test_scheme_config():
    """Test scheme labels and bit validation."""
    assert SchemeConfig("centralized").label == "centralized"
    assert SchemeConfig(Scheme.RLTSPRT, bits=2).label == "rlt-2bit"
    assert SchemeConfig("qsprt", bits=3).budget.r_tilde == 8
    with pytest.raises(ValueError):
        SchemeConfig(Scheme.QSPRT)
    with pytest.raises(ValueError):
        SchemeConfig("unknown")
    with pytest.raises(ValueError):
        SchemeConfig("centralized").budget


def test_centralized_step_upper():
    """Test stopping at the upper threshold."""
    state = FusionState(scheme="centralized", thresholds=SprtThresholds(2, 2))

    assert centralized_step(state, 1.0) is None
    assert centralized_step(state, 1.0) == Verdict(Hypothesis.H1, 2)
    assert state.message_count == 2
    assert state.bits_sent == 2 * RAW_SAMPLE_BITS


def test_centralized_step_overshoot():
    """Test stopping at the lower threshold with an overshoot."""
    state = FusionState(scheme="centralized", thresholds=SprtThresholds(2, 2))

    assert centralized_step(state, -3.0) == Verdict(Hypothesis.H0, 1)
    assert state.llr == -3.0


def test_centralized_step_never_stops():
    """Test that an alternating statistic stays inside the band."""
    state = FusionState(scheme="centralized", thresholds=SprtThresholds(2, 2))
    verdicts = [centralized_step(state, 0.5 if t % 2 else -0.5) for t in range(1, 101)]

    assert all(verdict is None for verdict in verdicts)
    assert state.time == 100


def test_step_wrong_scheme():
    """Test rejecting a fusion state of another scheme."""
    state = FusionState(scheme="qsprt", thresholds=SprtThresholds(2, 2))

    with pytest.raises(ValueError):
        centralized_step(state, 1.0)


def test_qsprt_step():
    """Test the synchronous Q-SPRT update."""
    state = FusionState(scheme="qsprt", thresholds=SprtThresholds(1.5, 1.5), period=4, k_users=2)

    assert qsprt_step(state, [1.0, -1.0], 4) is None
    assert state.llr == 0.0
    assert qsprt_step(state, [1.0, 1.0], 8) == Verdict(Hypothesis.H1, 8)
    assert state.llr == 2.0
    assert state.message_count == 4


@pytest.mark.parametrize("windows, t", [([1.0, 1.0], 3), ([1.0], 4)])
def test_qsprt_step_invalid(windows, t):
    """Test rejecting off-period updates and missing windows."""
    state = FusionState(scheme="qsprt", thresholds=SprtThresholds(1.5, 1.5), period=4, k_users=2)

    with pytest.raises(ValueError):
        qsprt_step(state, windows, t)


def test_rlt_step_one_bit():
    """Test the 1-bit FC statistic stepping by ``delta``."""
    state = FusionState(scheme="rlt", thresholds=SprtThresholds(2, 2), k_users=2)

    assert rlt_step(state, [SuMessage(3, 0, 1)], 3, 1.0, 1.0, 0) is None
    verdict = rlt_step(state, [SuMessage(7, 1, 1)], 7, 1.0, 1.0, 0)

    assert verdict == Verdict(Hypothesis.H1, 7)
    assert state.llr == 2.0
    assert state.lattice_index == 2


def test_rlt_step_simultaneous_messages():
    """Test that simultaneous messages are applied in SU order and the first exit wins."""
    state = FusionState(
        scheme="rlt", thresholds=SprtThresholds(2, 2), k_users=2, llr=-1.0, lattice_index=-1
    )
    msgs = [SuMessage(5, 1, 1), SuMessage(5, 0, -1)]

    assert rlt_step(state, msgs, 5, 1.0, 1.0, 0) == Verdict(Hypothesis.H0, 5)
    assert state.llr == -2.0
    assert state.message_count == 1


def test_rlt_step_no_messages():
    """Test that the statistic is constant between transmissions."""
    state = FusionState(scheme="rlt", thresholds=SprtThresholds(2, 2), llr=0.5)

    assert rlt_step(state, [], 4, 1.0, 1.0, 0) is None
    assert state.llr == 0.5


def test_rlt_step_multibit():
    """Test adding the reconstructed overshoot."""
    state = FusionState(scheme="rlt", thresholds=SprtThresholds(5, 5))
    rlt_step(state, [SuMessage(1, 0, -1, level=2)], 1, 1.0, 2.0, 4)

    assert state.llr == pytest.approx(-2.0)


@pytest.mark.parametrize(
    "scheme, bits_per_message",
    [
        (SchemeConfig(Scheme.CENTRALIZED), RAW_SAMPLE_BITS),
        (SchemeConfig(Scheme.RLTSPRT, bits=1, delta=1.0, phi=1.0), 1),
    ],
)
def test_run_scheme_constant_llr(scheme, bits_per_message):
    """Test the deterministic walk of a constant-LLR model."""
    result = run_scheme(
        scheme, [ConstantLlr(1.0)], SprtThresholds(5, 5), Hypothesis.H1, rng=trial_rng(0)
    )

    assert result.decision == Hypothesis.H1
    assert result.stop_time == 5
    assert result.message_count == 5
    assert result.bits_sent == 5 * bits_per_message
    assert result.centralized_llr_at_stop == 5.0
    assert not result.censored


def test_run_scheme_qsprt_constant_llr():
    """Test that Q-SPRT only updates at multiples of the period."""
    scheme = SchemeConfig(Scheme.QSPRT, bits=2, period=4, phi=1.0)
    result = run_scheme(
        scheme, [ConstantLlr(1.0)] * 2, SprtThresholds(5, 5), Hypothesis.H1, rng=trial_rng(0)
    )

    assert result.stop_time == 4
    assert result.message_count == 2
    assert result.bits_sent == 4


def test_run_scheme_censored():
    """Test censoring at the horizon."""
    result = run_scheme(
        SchemeConfig("centralized"),
        [ConstantLlr(1.0)],
        SprtThresholds(50, 50),
        Hypothesis.H1,
        horizon=10,
        rng=trial_rng(0),
    )

    assert result.censored
    assert result.decision is None
    assert result.stop_time == 10
    assert result.centralized_llr_at_stop == 10.0


def test_run_scheme_needs_resolved_parameters():
    """Test rejecting decentralized schemes without ``delta``/``phi``."""
    with pytest.raises(ValueError):
        run_scheme(SchemeConfig("rlt", bits=1), [GAUSSIAN], SprtThresholds(3, 3), Hypothesis.H1)
    with pytest.raises(ValueError):
        run_scheme(SchemeConfig("qsprt", bits=1), [GAUSSIAN], SprtThresholds(3, 3), Hypothesis.H1)


def test_run_scheme_deterministic():
    """Test that the same seed reproduces the same trial."""
    scheme = SchemeConfig(Scheme.RLTSPRT, bits=2, delta=1.5, phi=8.0)
    results = [
        run_scheme(scheme, [GAUSSIAN] * 2, SprtThresholds(4, 4), Hypothesis.H0, rng=trial_rng(7, 1))
        for _ in range(2)
    ]

    assert results[0] == results[1]


@pytest.mark.parametrize("hyp", list(Hypothesis))
def test_one_bit_lattice(hyp):
    """Test that the 1-bit FC statistic only visits multiples of ``delta``."""
    delta = 1.3
    scheme = SchemeConfig(Scheme.RLTSPRT, bits=1, delta=delta, phi=8.0)
    for i in range(20):
        result = run_scheme(
            scheme,
            [GAUSSIAN] * 2,
            SprtThresholds(6, 6),
            hyp,
            rng=trial_rng(3, i),
            record=True,
        )
        ratio = np.asarray(result.trace.llr) / delta
        np.testing.assert_allclose(ratio, np.round(ratio), atol=1e-9)


def test_one_bit_equivalent_thresholds():
    """Test that thresholds between the same lattice points give identical trials."""
    scheme = SchemeConfig(Scheme.RLTSPRT, bits=1, delta=1.0, phi=8.0)
    for i in range(20):
        results = [
            run_scheme(scheme, [GAUSSIAN] * 2, SprtThresholds(a, 3), Hypothesis.H1, rng=trial_rng(4, i))
            for a in (2.5, 2.9)
        ]
        assert results[0] == results[1]


@pytest.mark.parametrize(
    "scheme",
    [
        SchemeConfig(Scheme.CENTRALIZED),
        SchemeConfig(Scheme.QSPRT, bits=2, phi=8.0),
        SchemeConfig(Scheme.RLTSPRT, bits=2, delta=1.5, phi=8.0),
    ],
)
def test_replay_trace(scheme):
    """Test that replaying a recorded trial equals running it with the inner thresholds."""
    models = [GAUSSIAN] * 2
    inner = SprtThresholds(2.5, 3.5)
    for i in range(20):
        recorded = run_scheme(
            scheme, models, SprtThresholds(8, 8), Hypothesis.H1, rng=trial_rng(5, i), record=True
        )
        direct = run_scheme(scheme, models, inner, Hypothesis.H1, rng=trial_rng(5, i))

        assert replay_trace(recorded.trace, inner) == direct


def test_replay_trace_wider():
    """Test rejecting thresholds wider than the recorded ones."""
    result = run_scheme(
        SchemeConfig("centralized"),
        [ConstantLlr(1.0)],
        SprtThresholds(3, 3),
        Hypothesis.H1,
        rng=trial_rng(0),
        record=True,
    )

    with pytest.raises(ValueError):
        replay_trace(result.trace, SprtThresholds(4, 3))


def test_replay_trace_censored():
    """Test replaying a trial that never stops."""
    result = run_scheme(
        SchemeConfig("centralized"),
        [ConstantLlr(1.0)],
        SprtThresholds(50, 50),
        Hypothesis.H1,
        horizon=10,
        rng=trial_rng(0),
        record=True,
    )
    replayed = replay_trace(result.trace, SprtThresholds(20, 20))

    assert replayed == TrialResult(
        verdict=Verdict(None, 10),
        stop_time=10,
        message_count=10,
        bits_sent=10 * RAW_SAMPLE_BITS,
        centralized_llr_at_stop=10.0,
        censored=True,
    )


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    bits=st.sampled_from([1, 2, 3]),
    a=st.floats(min_value=0.5, max_value=6.0),
    b=st.floats(min_value=0.5, max_value=6.0),
)
def test_rlt_statistic_overshoot(seed, bits, a, b):
    """Test that the FC statistic stops within one batch of messages past its threshold."""
    scheme = SchemeConfig("rlt", bits=bits, delta=1.75, phi=10.0)
    result = run_scheme(
        scheme, [GAUSSIAN] * 2, SprtThresholds(a, b), Hypothesis.H1, rng=np.random.default_rng(seed), record=True
    )
    jump = 2 * (scheme.delta + scheme.phi)

    assert not result.censored
    assert -b - jump <= result.trace.llr[-1] <= a + jump
    assert result.trace.llr[-1] >= a or result.trace.llr[-1] <= -b
