"""Fusion-center decision logic and the single-trial driver."""

from __future__ import annotations

import logging
from enum import Enum
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np
from attrs import Factory, define, field, frozen, validators

from seqsense.detectors import DetectorModel, Hypothesis, LlrStream
from seqsense.sampling import (
    BitBudget,
    LtSamplerState,
    SuMessage,
    UniformWindowState,
    lt_step,
    message_bits,
    reconstruct_increment,
    uniform_window_step,
)

LOG = logging.getLogger(__name__)

DEFAULT_HORIZON: int = 1_000_000
# Raw LLRs are shipped as IEEE doubles by the centralized scheme.
RAW_SAMPLE_BITS: int = 64


class Scheme(str, Enum):
    """The three sensing schemes."""

    CENTRALIZED = "centralized"
    QSPRT = "qsprt"
    RLTSPRT = "rlt"


@frozen
class SchemeConfig:
    """Scheme selector and its communication parameters.

    Parameters
    ----------
    kind : Scheme
        Which scheme to run.
    bits : int, optional (default None)
        Bits per message. Required by the decentralized schemes.
    period : int, optional (default 4)
        Communication period ``T`` of the uniform sampler. The level-triggered
        threshold is matched to it.
    delta : float, optional (default None)
        Local threshold of the level-triggered sampler. Filled in by calibration
        unless given explicitly.
    phi : float, optional (default None)
        LLR bound used by both quantizers. Filled in by calibration.
    """

    kind: Scheme = field(converter=Scheme)
    bits: Optional[int] = field(default=None)
    period: int = field(default=4, validator=validators.ge(1))
    delta: Optional[float] = field(default=None)
    phi: Optional[float] = field(default=None)

    @bits.validator
    def _check_bits(self, attribute, value):
        if self.kind is not Scheme.CENTRALIZED and (value is None or value < 1):
            raise ValueError(f"The ``{self.kind.value}`` scheme needs ``bits >= 1``, got {value}.")

    @property
    def budget(self) -> BitBudget:
        """The per-message bit budget."""
        if self.bits is None:
            raise ValueError("The centralized scheme has no bit budget.")
        return BitBudget(self.bits)

    @property
    def label(self) -> str:
        """Short name used in tables, e.g. ``rlt-1bit``."""
        if self.kind is Scheme.CENTRALIZED:
            return self.kind.value
        return f"{self.kind.value}-{self.bits}bit"


@frozen
class SprtThresholds:
    """Upper threshold ``a`` and lower threshold magnitude ``b`` of an SPRT-like test."""

    a: float = field(converter=float, validator=validators.gt(0))
    b: float = field(converter=float, validator=validators.gt(0))


@frozen
class Verdict:
    """Outcome of a test: the decision (absent when censored) and the stopping time."""

    decision: Optional[Hypothesis]
    stop_time: int


@define
class FusionTrace:
    """FC statistic recorded after every update of one trial.

    Attributes
    ----------
    thresholds : SprtThresholds
        The thresholds the trial was recorded with.
    horizon : int
        The horizon of the recorded trial.
    times, llr, reference, messages, bits : list
        Per-update time, FC statistic, exact centralized LLR and cumulative
        message and bit counts.
    final : tuple, optional
        ``(reference, messages, bits)`` at the horizon, for censored trials.
    """

    thresholds: SprtThresholds
    horizon: int
    times: List[int] = Factory(list)
    llr: List[float] = Factory(list)
    reference: List[float] = Factory(list)
    messages: List[int] = Factory(list)
    bits: List[int] = Factory(list)
    final: Optional[tuple] = None


@define
class FusionState:
    """Running state of the fusion center.

    Parameters
    ----------
    scheme : Scheme
        The scheme being run.
    thresholds : SprtThresholds
        Stopping thresholds.
    period : int, optional (default 1)
        Update period; only Q-SPRT uses more than one.
    k_users : int, optional (default 1)
        Number of SUs reporting to the FC.
    bits_per_message : int, optional (default 64)
        Bits charged for every received message.
    llr : float, optional (default 0)
        The FC statistic.
    lattice_index : int, optional (default 0)
        Net count of sign bits; the 1-bit statistic is ``lattice_index * delta``.
    reference_llr : float, optional (default 0)
        The exact centralized LLR, maintained by the trial driver.
    message_count, bits_sent, time : int
        Counters.
    trace : FusionTrace, optional
        When present every update is appended to it.
    """

    scheme: Scheme = field(converter=Scheme)
    thresholds: SprtThresholds
    period: int = 1
    k_users: int = 1
    bits_per_message: int = RAW_SAMPLE_BITS
    llr: float = 0.0
    lattice_index: int = 0
    reference_llr: float = 0.0
    message_count: int = 0
    bits_sent: int = 0
    time: int = 0
    trace: Optional[FusionTrace] = None


def _check_scheme(state: FusionState, scheme: Scheme):
    if state.scheme is not scheme:
        raise ValueError(f"Expected a {scheme.value} fusion state, got {state.scheme.value}.")


def _receive(state: FusionState, count: int):
    state.message_count += count
    state.bits_sent += count * state.bits_per_message


def _test(state: FusionState) -> Optional[Verdict]:
    """Record the update and apply the two-sided threshold test."""
    trace = state.trace
    if trace is not None:
        trace.times.append(state.time)
        trace.llr.append(state.llr)
        trace.reference.append(state.reference_llr)
        trace.messages.append(state.message_count)
        trace.bits.append(state.bits_sent)
    if state.llr >= state.thresholds.a:
        return Verdict(Hypothesis.H1, state.time)
    if state.llr <= -state.thresholds.b:
        return Verdict(Hypothesis.H0, state.time)
    return None


def centralized_step(
    state: FusionState, sum_llr_increment: float, t: Optional[int] = None
) -> Optional[Verdict]:
    """Add the summed LLR of one time step and test.

    Parameters
    ----------
    state : FusionState
        A centralized fusion state; updated in place.
    sum_llr_increment : float
        ``sum_k l_t^k``.
    t : int, optional (default None)
        The time index. Defaults to one past the last update.

    Returns
    -------
    Verdict or None
        The verdict if the statistic left ``(-b, a)``.
    """
    _check_scheme(state, Scheme.CENTRALIZED)
    state.time = state.time + 1 if t is None else t
    _receive(state, state.k_users)
    state.llr += sum_llr_increment
    return _test(state)


def qsprt_step(
    state: FusionState, quantized_windows: Sequence[float], t: int
) -> Optional[Verdict]:
    """Add one synchronous round of quantized window LLRs and test.

    Parameters
    ----------
    state : FusionState
        A Q-SPRT fusion state; updated in place.
    quantized_windows : sequence of float
        One quantized window LLR per SU.
    t : int
        The time index; must be a positive multiple of the period.

    Returns
    -------
    Verdict or None
        The verdict if the statistic left ``(-b, a)``.

    Raises
    ------
    ValueError
        Raised when called off-period or with the wrong number of windows.
    """
    _check_scheme(state, Scheme.QSPRT)
    if t <= 0 or t % state.period:
        raise ValueError(f"Q-SPRT updates happen at multiples of T={state.period}, not at t={t}.")
    if len(quantized_windows) != state.k_users:
        raise ValueError(
            f"Expected {state.k_users} window values, got {len(quantized_windows)}."
        )
    state.time = t
    _receive(state, len(quantized_windows))
    state.llr += sum(quantized_windows)
    return _test(state)


def rlt_step(
    state: FusionState,
    msgs: Iterable[SuMessage],
    t: int,
    delta: float,
    phi: float,
    r_hat: int,
) -> Optional[Verdict]:
    """Process the level-triggered messages stamped ``t``.

    Messages are applied one at a time in ascending SU order and the test runs
    after each one; the first exit stops the test and the remaining messages
    of the batch are discarded.

    Parameters
    ----------
    state : FusionState
        An RLT-SPRT fusion state; updated in place.
    msgs : iterable of SuMessage
        Messages arriving at ``t``, possibly none.
    t : int
        The time index.
    delta, phi, r_hat
        Quantizer parameters shared with the SUs.

    Returns
    -------
    Verdict or None
        The verdict if the statistic left ``(-b, a)``.
    """
    _check_scheme(state, Scheme.RLTSPRT)
    state.time = t
    for msg in sorted(msgs, key=lambda m: m.su_id):
        _receive(state, 1)
        if r_hat == 0:
            state.lattice_index += msg.sign
            state.llr = state.lattice_index * delta
        else:
            state.llr += reconstruct_increment(msg, delta, phi, r_hat)
        verdict = _test(state)
        if verdict is not None:
            return verdict
    return None


@frozen
class TrialResult:
    """Outcome of one simulated trial.

    Parameters
    ----------
    verdict : Verdict
        Decision and stopping time.
    stop_time : int
        Stopping time, or the horizon for censored trials.
    message_count : int
        Messages received by the FC up to the stop.
    bits_sent : int
        Bits received by the FC up to the stop.
    centralized_llr_at_stop : float
        Exact centralized LLR at the stopping time.
    censored : bool
        Whether the horizon was reached without a decision.
    trace : FusionTrace, optional
        The recorded FC statistic, when requested.
    """

    verdict: Verdict
    stop_time: int
    message_count: int
    bits_sent: int
    centralized_llr_at_stop: float
    censored: bool = False
    trace: Optional[FusionTrace] = field(default=None, eq=False, repr=False)

    @property
    def decision(self) -> Optional[Hypothesis]:
        """The decision, ``None`` when censored."""
        return self.verdict.decision


Driver = Callable[[FusionState, List[float], int], Optional[Verdict]]


def _centralized_driver(scheme: SchemeConfig, k_users: int) -> Driver:
    def step(state, increments, t):
        return centralized_step(state, sum(increments), t)

    return step


def _qsprt_driver(scheme: SchemeConfig, k_users: int) -> Driver:
    if scheme.phi is None:
        raise ValueError("Q-SPRT needs ``phi``; calibrate the scheme first.")
    windows = [
        UniformWindowState(period=scheme.period, r_tilde=scheme.budget.r_tilde, phi=scheme.phi)
        for _ in range(k_users)
    ]

    def step(state, increments, t):
        values = [uniform_window_step(w, l_t, t) for w, l_t in zip(windows, increments)]
        if t % scheme.period:
            return None
        return qsprt_step(state, values, t)

    return step


def _rlt_driver(scheme: SchemeConfig, k_users: int, rng: np.random.Generator) -> Driver:
    if scheme.delta is None or scheme.phi is None:
        raise ValueError("RLT-SPRT needs ``delta`` and ``phi``; calibrate the scheme first.")
    r_hat = scheme.budget.r_hat
    samplers = [
        LtSamplerState(delta=scheme.delta, phi=scheme.phi, r_hat=r_hat, su_id=k)
        for k in range(k_users)
    ]

    def step(state, increments, t):
        msgs = []
        for sampler, l_t in zip(samplers, increments):
            msg = lt_step(sampler, l_t, t, rng)
            if msg is not None:
                msgs.append(msg)
        if not msgs:
            return None
        return rlt_step(state, msgs, t, scheme.delta, scheme.phi, r_hat)

    return step


def _bits_per_message(scheme: SchemeConfig) -> int:
    if scheme.kind is Scheme.CENTRALIZED:
        return RAW_SAMPLE_BITS
    if scheme.kind is Scheme.QSPRT:
        return scheme.budget.bits
    return message_bits(scheme.budget.r_hat)


def run_scheme(
    scheme: SchemeConfig,
    models: Sequence[DetectorModel],
    thresholds: SprtThresholds,
    hyp: Hypothesis,
    horizon: int = DEFAULT_HORIZON,
    rng: Optional[np.random.Generator] = None,
    record: bool = False,
    block_size: int = 256,
) -> TrialResult:
    """Simulate one trial of a scheme.

    Parameters
    ----------
    scheme : SchemeConfig
        The scheme, with ``delta``/``phi`` resolved for decentralized schemes.
    models : sequence of DetectorModel
        One model per SU.
    thresholds : SprtThresholds
        FC thresholds.
    hyp : Hypothesis
        The hypothesis generating the observations.
    horizon : int, optional (default 1000000)
        Maximum number of time steps.
    rng : numpy.random.Generator, optional
        The trial's private random stream.
    record : bool, optional (default False)
        Whether to attach a :py:class:`FusionTrace` to the result.
    block_size : int, optional (default 256)
        Observations drawn per SU at a time.

    Returns
    -------
    TrialResult
        The trial outcome. Censored when the horizon is reached.
    """
    if horizon < 1:
        raise ValueError(f"``horizon`` must be at least 1, got {horizon}.")
    rng = np.random.default_rng() if rng is None else rng
    hyp = Hypothesis(hyp)
    k_users = len(models)

    if scheme.kind is Scheme.CENTRALIZED:
        driver = _centralized_driver(scheme, k_users)
    elif scheme.kind is Scheme.QSPRT:
        driver = _qsprt_driver(scheme, k_users)
    else:
        driver = _rlt_driver(scheme, k_users, rng)

    state = FusionState(
        scheme=scheme.kind,
        thresholds=thresholds,
        period=scheme.period if scheme.kind is Scheme.QSPRT else 1,
        k_users=k_users,
        bits_per_message=_bits_per_message(scheme),
        trace=FusionTrace(thresholds=thresholds, horizon=horizon) if record else None,
    )
    streams = [LlrStream(model, hyp) for model in models]

    t = 0
    verdict = None
    while verdict is None and t < horizon:
        size = min(block_size, horizon - t)
        block = np.vstack([stream.draw(size, rng) for stream in streams]).T.tolist()
        for increments in block:
            t += 1
            state.reference_llr += sum(increments)
            verdict = driver(state, increments, t)
            if verdict is not None:
                break

    if verdict is None:
        LOG.debug(f"{scheme.label} trial censored at horizon {horizon}")
        if state.trace is not None:
            state.trace.final = (state.reference_llr, state.message_count, state.bits_sent)
        return TrialResult(
            verdict=Verdict(None, horizon),
            stop_time=horizon,
            message_count=state.message_count,
            bits_sent=state.bits_sent,
            centralized_llr_at_stop=state.reference_llr,
            censored=True,
            trace=state.trace,
        )

    return TrialResult(
        verdict=verdict,
        stop_time=verdict.stop_time,
        message_count=state.message_count,
        bits_sent=state.bits_sent,
        centralized_llr_at_stop=state.reference_llr,
        trace=state.trace,
    )


def replay_trace(trace: FusionTrace, thresholds: SprtThresholds) -> TrialResult:
    """Re-evaluate a recorded trial with tighter thresholds.

    The FC statistic does not depend on the thresholds until it stops, so the
    outcome under any ``thresholds`` inside the recorded ones follows from the
    first recorded update that leaves ``(-b, a)``.

    Parameters
    ----------
    trace : FusionTrace
        A trace recorded by :py:func:`run_scheme`.
    thresholds : SprtThresholds
        Thresholds no wider than the recorded ones.

    Returns
    -------
    TrialResult
        The outcome the trial would have had under ``thresholds``.
    """
    if thresholds.a > trace.thresholds.a or thresholds.b > trace.thresholds.b:
        raise ValueError(
            f"Cannot replay {thresholds} on a trace recorded with {trace.thresholds}."
        )
    llr = np.asarray(trace.llr)
    hits = np.flatnonzero((llr >= thresholds.a) | (llr <= -thresholds.b))
    if hits.size == 0:
        if trace.final is None:
            raise ValueError("The trace neither stops nor records a censored ending.")
        reference, messages, bits = trace.final
        return TrialResult(
            verdict=Verdict(None, trace.horizon),
            stop_time=trace.horizon,
            message_count=messages,
            bits_sent=bits,
            centralized_llr_at_stop=reference,
            censored=True,
        )
    i = int(hits[0])
    decision = Hypothesis.H1 if llr[i] >= thresholds.a else Hypothesis.H0
    return TrialResult(
        verdict=Verdict(decision, trace.times[i]),
        stop_time=trace.times[i],
        message_count=trace.messages[i],
        bits_sent=trace.bits[i],
        centralized_llr_at_stop=trace.reference[i],
    )
