"""SU-side samplers.

Two samplers are provided. The level-triggered sampler transmits a message
whenever the LLR accumulated since the last message leaves ``(-delta, delta)``;
the message carries the sign of the crossing and a randomly quantized
overshoot. The uniform sampler transmits the quantized window LLR every
``period`` time steps.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np
from attrs import define, field, frozen, validators

from seqsense.detectors import DetectorModel, Hypothesis, LlrStream

LOG = logging.getLogger(__name__)


def message_bits(r_hat: int) -> int:
    """Bits needed by one level-triggered message: a sign plus ``ceil(log2(1 + r_hat))``."""
    return 1 + int(r_hat).bit_length()


@frozen
class BitBudget:
    """At most ``bits`` bits per SU message.

    The uniform sampler spends them on ``2 ** bits`` quantization levels; the
    level-triggered sampler spends one on the sign and the rest on
    ``2 ** (bits - 1) - 1`` overshoot subintervals.
    """

    bits: int = field(validator=validators.ge(1))

    @property
    def r_tilde(self) -> int:
        """Uniform quantizer levels."""
        return 2**self.bits

    @property
    def r_hat(self) -> int:
        """Overshoot subintervals."""
        return 2 ** (self.bits - 1) - 1


@frozen
class SuMessage:
    """One asynchronous SU to FC transmission.

    Parameters
    ----------
    time : int
        Sampling time index.
    su_id : int
        Index of the transmitting SU.
    sign : {-1, 1}
        Which threshold was crossed.
    level : int, optional (default 0)
        Index of the quantized overshoot on the lattice ``m * phi / r_hat``.
    """

    time: int
    su_id: int
    sign: int = field(validator=validators.in_((-1, 1)))
    level: int = field(default=0, validator=validators.ge(0))

    def encode(self, r_hat: int) -> int:
        """Pack the message into ``message_bits(r_hat)`` bits, sign bit first.

        Parameters
        ----------
        r_hat : int
            Number of overshoot subintervals.

        Returns
        -------
        int
            The packed code word.
        """
        if self.level > r_hat:
            raise ValueError(f"Level {self.level} does not fit a {r_hat}-interval quantizer.")
        level_bits = message_bits(r_hat) - 1
        return (int(self.sign > 0) << level_bits) | self.level


@define
class LtSamplerState:
    """State of the level-triggered sampler at one SU.

    Parameters
    ----------
    delta : float
        Local threshold.
    phi : float
        Overshoot bound.
    r_hat : int, optional (default 0)
        Overshoot quantization subintervals. ``0`` transmits the sign only.
    su_id : int, optional (default 0)
        The SU index stamped on emitted messages.
    accumulator : float, optional (default 0)
        LLR accumulated since the last emission.
    last_sample_time : int, optional (default 0)
        Time of the last emission.
    """

    delta: float = field(converter=float, validator=validators.gt(0))
    phi: float = field(converter=float, validator=validators.gt(0))
    r_hat: int = field(default=0, validator=validators.ge(0))
    su_id: int = 0
    accumulator: float = 0.0
    last_sample_time: int = 0


@define
class UniformWindowState:
    """State of the uniform-period sampler at one SU.

    Parameters
    ----------
    period : int
        Communication period ``T``.
    r_tilde : int
        Number of quantization levels.
    phi : float
        Per-sample LLR bound; the window LLR is quantized on ``(-T phi, T phi)``.
    window_sum : float, optional (default 0)
        LLR accumulated in the current window.
    """

    period: int = field(validator=validators.ge(1))
    r_tilde: int = field(validator=validators.ge(1))
    phi: float = field(converter=float, validator=validators.gt(0))
    window_sum: float = 0.0


def clip_overshoot(q: float, phi: float) -> float:
    """Clip an overshoot into ``[0, phi)``."""
    bound = float(np.nextafter(phi, 0.0))
    if q > bound:
        LOG.debug(f"Overshoot {q} exceeds phi={phi}; clipping.")
        return bound
    return q


def quantizer_probability(q: float, r_hat: int, phi: float) -> Tuple[int, float]:
    """Lower lattice index and the probability of choosing it.

    Parameters
    ----------
    q : float
        Overshoot in ``[0, phi)``.
    r_hat : int
        Number of subintervals, at least one.
    phi : float
        Overshoot bound.

    Returns
    -------
    int
        The lower lattice index ``m``.
    float
        The probability ``p`` of quantizing to ``m`` rather than ``m + 1``.
    """
    if not 0 <= q < phi:
        raise ValueError(f"Overshoot {q} is outside [0, {phi}); clip it first.")
    if r_hat < 1:
        raise ValueError(f"``r_hat`` must be at least 1, got {r_hat}.")
    eps = phi / r_hat
    m = min(math.floor(q / eps), r_hat - 1)
    # p = (1 - exp(q - (m + 1) eps)) / (1 - exp(-eps))
    p = math.expm1(q - (m + 1) * eps) / math.expm1(-eps)
    return m, min(max(p, 0.0), 1.0)


def randomized_quantize(q: float, r_hat: int, phi: float, rng: np.random.Generator) -> int:
    """Quantize an overshoot to one of the two surrounding lattice points.

    The lower point ``m * phi / r_hat`` is chosen with probability ``p`` from
    :py:func:`quantizer_probability`, the upper one otherwise. The choice of
    ``p`` keeps ``E[exp(+-(delta + q_hat))]`` below ``exp(+-(delta + q))``.

    Parameters
    ----------
    q : float
        Overshoot in ``[0, phi)``.
    r_hat : int
        Number of subintervals, at least one.
    phi : float
        Overshoot bound.
    rng : numpy.random.Generator
        One uniform variate is drawn per call.

    Returns
    -------
    int
        The lattice index in ``[0, r_hat]``.
    """
    m, p = quantizer_probability(q, r_hat, phi)
    return m if rng.random() < p else m + 1


def reconstruct_increment(msg: SuMessage, delta: float, phi: float, r_hat: int) -> float:
    """FC-side estimate ``sign * (delta + q_hat)`` of the LLR increment of a message."""
    if r_hat == 0:
        return msg.sign * delta
    return msg.sign * (delta + msg.level * phi / r_hat)


def lt_step(
    state: LtSamplerState, l_t: float, t: int, rng: np.random.Generator
) -> Optional[SuMessage]:
    """Advance the level-triggered sampler by one observation.

    Parameters
    ----------
    state : LtSamplerState
        The sampler; updated in place.
    l_t : float
        LLR increment of the observation at time ``t``.
    t : int
        The time index.
    rng : numpy.random.Generator
        Randomization for the overshoot quantizer.

    Returns
    -------
    SuMessage or None
        The emitted message, if the accumulator left ``(-delta, delta)``.
    """
    state.accumulator += l_t
    if abs(state.accumulator) < state.delta:
        return None

    sign = 1 if state.accumulator > 0 else -1
    level = 0
    if state.r_hat > 0:
        q = clip_overshoot(abs(state.accumulator) - state.delta, state.phi)
        level = randomized_quantize(q, state.r_hat, state.phi, rng)
    state.accumulator = 0.0
    state.last_sample_time = t

    return SuMessage(time=t, su_id=state.su_id, sign=sign, level=level)


def uniform_quantize(lam: float, period: int, phi: float, r_tilde: int) -> Tuple[int, float]:
    """Mid-point uniform quantizer of a window LLR on ``(-T phi, T phi)``.

    Returns
    -------
    int
        The cell index in ``[0, r_tilde)``.
    float
        The cell mid-point.
    """
    span = period * phi
    index = math.floor(r_tilde * (lam + span) / (2 * span))
    index = min(max(index, 0), r_tilde - 1)
    return index, -span + span / r_tilde + index * 2 * span / r_tilde


def uniform_window_step(state: UniformWindowState, l_t: float, t: int) -> Optional[float]:
    """Advance the uniform sampler by one observation.

    Parameters
    ----------
    state : UniformWindowState
        The sampler; updated in place.
    l_t : float
        LLR increment at time ``t``.
    t : int
        The time index, starting at 1.

    Returns
    -------
    float or None
        The quantized window LLR at the end of a period.
    """
    state.window_sum += l_t
    if t % state.period:
        return None
    _, value = uniform_quantize(state.window_sum, state.period, state.phi, state.r_tilde)
    state.window_sum = 0.0

    return value


def local_sign_error_bound(delta: float) -> float:
    """Bound ``exp(-delta) / (1 + exp(-delta))`` on the wrong-sign probability of a local SPRT."""
    return math.exp(-delta) / (1 + math.exp(-delta))


def sign_probability(
    model: DetectorModel,
    delta: float,
    hyp: Hypothesis,
    n_messages: int,
    rng: np.random.Generator,
    block_size: int = 1024,
) -> Tuple[float, float]:
    """Empirical probability that a level-triggered message carries ``b = +1``.

    One SU runs :py:func:`lt_step` on its own LLR stream until ``n_messages``
    messages are emitted. Under H0 the result is the wrong-sign probability,
    to be compared with :py:func:`local_sign_error_bound`.

    Parameters
    ----------
    model : DetectorModel
        The SU's sensing model.
    delta : float
        Local threshold.
    hyp : Hypothesis
        The hypothesis generating the observations.
    n_messages : int
        Number of messages to collect.
    rng : numpy.random.Generator
        The random stream.
    block_size : int, optional (default 1024)
        LLR increments drawn at once.

    Returns
    -------
    float
        The fraction of positive messages.
    float
        Its standard error.
    """
    if n_messages < 1:
        raise ValueError(f"``n_messages`` must be positive, got {n_messages}.")
    stream = LlrStream(model, hyp)
    state = LtSamplerState(delta=delta, phi=1.0)
    positive, count, t = 0, 0, 0
    while count < n_messages:
        for l_t in stream.draw(block_size, rng):
            t += 1
            msg = lt_step(state, float(l_t), t, rng)
            if msg is None:
                continue
            positive += msg.sign > 0
            count += 1
            if count == n_messages:
                break
    p = positive / count
    LOG.debug(f"{count} messages in {t} steps under {hyp.name}; P(b=+1) = {p:.4g}")

    return p, math.sqrt(p * (1 - p) / count)
