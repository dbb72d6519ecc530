"""
Closed-form response of a DD sensor to classical AC fields.

The sequence acts as a narrowband filter centred at ``f = 1/(2 tau)``. An AC
field of random (unsynchronized) phase leaves the sensor in its initial state
with probability ``p = (1 + J0(W gamma B N tau)) / 2``, where ``W`` is the
filter weight below.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .bessel import bessel_j0
from .envelope import PulseShape
from .errors import ValidationError
from .scan import ScanResult

GAMMA_NV = 2 * np.pi * 28e9  # rad s^-1 T^-1
RESONANCE_SWITCH = 1e-6


@dataclass(frozen=True)
class SensorModel:
    gamma: float = GAMMA_NV
    t2: float | None = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValidationError("gamma must be positive", key="gamma")
        if self.t2 is not None and not self.t2 > 0:
            raise ValidationError("t2 must be positive when given", key="t2")


@dataclass(frozen=True)
class AcSignal:
    """A classical AC field ``b_ac * cos(2 pi f_ac t + phase)``.

    ``phase=None`` means the phase is not synchronized to the sequence and is
    averaged over, which is the only case the closed form covers.
    """

    f_ac: float
    b_ac: float
    phase: float | None = None

    def __post_init__(self):
        if not self.f_ac > 0:
            raise ValidationError("f_ac must be positive", key="f_ac")
        if not self.b_ac >= 0:
            raise ValidationError("b_ac must be non-negative", key="b_ac")


@dataclass(frozen=True)
class SequenceParams:
    n_pulses: int
    tau: float
    t_pi: float = 0.0
    shape: PulseShape = field(default=PulseShape.IDEAL)

    def __post_init__(self):
        object.__setattr__(self, "shape", PulseShape.parse(self.shape))
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise ValidationError("n_pulses must be a positive integer", key="n_pulses")
        object.__setattr__(self, "n_pulses", int(self.n_pulses))
        if not self.tau > 0:
            raise ValidationError("tau must be positive", key="tau")
        if self.t_pi < 0:
            raise ValidationError("t_pi must be non-negative", key="t_pi")
        if self.shape is not PulseShape.IDEAL and self.tau < self.t_pi:
            raise ValidationError("pulses overlap: tau < t_pi", key="tau")

    def require_even(self):
        if self.n_pulses % 2:
            raise ValidationError(
                f"n_pulses={self.n_pulses} is odd; the filter weight is only defined "
                "for an even number of pulses",
                key="n_pulses",
            )


def min_freq_increment(tau: float, t_s: float) -> tuple[float, float]:
    """Smallest frequency step reachable by changing ``tau`` by one sample.

    Returns ``(exact, approx)`` with ``approx = 2 t_s f^2`` at ``f = 1/(2 tau)``.
    """
    if not tau > 0 or t_s < 0:
        raise ValidationError("tau must be positive and t_s non-negative")
    exact = 1.0 / (2 * tau) - 1.0 / (2 * tau + 2 * t_s)
    f_ac = 1.0 / (2 * tau)
    return exact, 2.0 * t_s * f_ac**2


def frequency_step(tau_step: float, f_ac: float) -> float:
    """Frequency sampling interval produced by a ``tau`` step near resonance."""
    return 2.0 * tau_step * f_ac**2


def resonant_tau(f_ac: float) -> float:
    if not f_ac > 0:
        raise ValidationError("f_ac must be positive", key="f_ac")
    return 1.0 / (2.0 * f_ac)


def interpolated_resolution(t_pi: float, bits: int) -> float:
    """Timing step set by the envelope slope and the DAC amplitude step."""
    if not t_pi > 0 or bits < 0:
        raise ValidationError("t_pi must be positive and bits non-negative")
    return t_pi * 2.0 ** (-bits)


def _weight(f, n_pulses: int, tau):
    f = np.asarray(f, dtype=float)
    tau = np.asarray(tau, dtype=float)
    u = f * tau
    m = np.floor(u)
    eps = 2.0 * (u - m) - 1.0
    near = np.abs(eps) < RESONANCE_SWITCH
    if near.any() and n_pulses % 2:
        raise ValidationError(
            f"formula limit undefined for odd N (n_pulses={n_pulses}) at f*tau near "
            "an odd multiple of 1/2; use an even number of pulses",
            key="n_pulses",
        )

    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.abs(np.sinc(n_pulses * u) * (1.0 - 1.0 / np.cos(np.pi * u)))

        # Near f*tau = m + 1/2 write z = pi*u = (2m+1) pi/2 + d. For even N,
        #   sin(N z) (1 - sec z) = +-[sin(N d) + (-1)^m sin(N d)/sin(d)],
        # which has no cancellation and tends to (-1)^m N as d -> 0.
        d = 0.5 * np.pi * eps
        sin_d = np.sin(d)
        dirichlet = np.where(sin_d == 0, float(n_pulses), np.sin(n_pulses * d) / sin_d)
        sign = np.where(np.mod(m, 2) == 0, 1.0, -1.0)
        limit = np.abs(np.sin(n_pulses * d) + sign * dirichlet) / (n_pulses * np.pi * u)

    return np.where(near, limit, raw)


def filter_weight(f_ac, seq: SequenceParams):
    """Spectral weight of the sequence at ``f_ac`` (scalar or array).

    Peaks at ``2/pi`` on resonance ``f_ac = 1/(2 tau)``.
    """
    if np.any(np.asarray(f_ac) < 0):
        raise ValidationError("f_ac must be non-negative", key="f_ac")
    w = _weight(f_ac, seq.n_pulses, seq.tau)
    return float(w) if np.ndim(w) == 0 else w


def _contrast(tau, n_pulses: int, signals, sensor: SensorModel):
    tau = np.asarray(tau, dtype=float)
    t = n_pulses * tau
    c = np.ones_like(tau)
    for sig in signals:
        if sig.phase is not None:
            raise ValidationError(
                "synchronized-phase signals are not covered by the phase-averaged response",
                key="phase",
            )
        if sig.b_ac == 0:
            continue
        arg = _weight(sig.f_ac, n_pulses, tau) * sensor.gamma * sig.b_ac * t
        c = c * bessel_j0(arg)
    if sensor.t2 is not None:
        c = c * np.exp(-((t / sensor.t2) ** 2))
    return c


def response_p(seq: SequenceParams, signals, sensor: SensorModel | None = None) -> float:
    """Probability that the sensor keeps its initial state.

    Several tones multiply their J0 factors, which is exact when their phases
    are independent and uniformly random. Decoherence scales the contrast
    ``2p - 1`` by ``exp(-(t/T2)^2)``.
    """
    sensor = sensor or SensorModel()
    seq.require_even()
    c = _contrast(seq.tau, seq.n_pulses, list(signals), sensor)
    return float(0.5 * (1.0 + c))


def _echo(obj):
    d = asdict(obj)
    for k, v in d.items():
        if isinstance(v, PulseShape):
            d[k] = v.value
    return d


def scan_response(
    seq: SequenceParams,
    tau_start: float,
    tau_step: float,
    n_points: int,
    signals,
    sensor: SensorModel | None = None,
) -> ScanResult:
    """Evaluate `response_p` on ``tau_start + i * tau_step`` for i < n_points.

    Each point is computed independently, so results do not depend on how the
    grid is partitioned.
    """
    sensor = sensor or SensorModel()
    seq.require_even()
    if n_points < 1:
        raise ValidationError("n_points must be at least 1", key="n_points")
    signals = list(signals)
    tau = tau_start + np.arange(n_points) * tau_step
    if np.any(tau <= 0):
        raise ValidationError("scan reaches non-positive tau", key="tau_start")
    p = 0.5 * (1.0 + _contrast(tau, seq.n_pulses, signals, sensor))
    meta = {
        "model": "analytic",
        "sequence": _echo(seq),
        "signals": [_echo(s) for s in signals],
        "sensor": _echo(sensor),
        "tau_start": tau_start,
        "tau_step": tau_step,
        "n_points": int(n_points),
    }
    return ScanResult(tau, p, meta)
