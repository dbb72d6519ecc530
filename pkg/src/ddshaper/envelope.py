"""
Amplitude-shaped pulse trains on a discrete DAC sample grid.

A dynamical decoupling sequence of ``N`` pi pulses with repetition time ``tau``
is rendered as an envelope in [0, 1]. Each period holds one lobe centred at
``(k + 1/2) * tau``. Because ``tau`` is an arbitrary real number, a cosine-square
lobe encodes sub-sample pulse positions in its amplitudes, while a square lobe
can only move in whole samples.
"""
from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from ._io import atomic_write_bytes, atomic_write_text
from .errors import ValidationError

BINARY_MAGIC = b"DDWF"
BINARY_FULL_SCALE = 2**15 - 2


class PulseShape(str, Enum):
    IDEAL = "ideal"
    SQUARE = "square"
    COSINE_SQUARE = "cosine"

    @classmethod
    def parse(cls, value: "PulseShape | str") -> "PulseShape":
        if isinstance(value, cls):
            return value
        aliases = {
            "ideal": cls.IDEAL,
            "delta": cls.IDEAL,
            "square": cls.SQUARE,
            "rect": cls.SQUARE,
            "cosine": cls.COSINE_SQUARE,
            "cosine_square": cls.COSINE_SQUARE,
            "cos2": cls.COSINE_SQUARE,
        }
        try:
            return aliases[str(value).strip().lower()]
        except KeyError:
            raise ValidationError(
                f"unknown pulse shape {value!r}; expected one of ideal, square, cosine",
                key="shape",
            ) from None


@dataclass(frozen=True)
class WaveformSpec:
    """Physical description of a shaped DD pulse train.

    ``n_samples`` is normally derived as ``round(N * tau * sample_rate)`` and the
    pulse phase follows physical time, so pulse ``k`` is centred at
    ``(k + 1/2) * tau``. Passing ``n_samples`` explicitly switches to the literal
    index-to-phase map ``x = i * N / n`` with period ``n / (N * sample_rate)``.
    """

    n_pulses: int
    tau: float
    t_pi: float
    sample_rate: float = 5e8
    vertical_bits: int = 14
    shape: PulseShape = PulseShape.COSINE_SQUARE
    peak_amplitude: float = 1.0
    n_samples: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "shape", PulseShape.parse(self.shape))
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise ValidationError("n_pulses must be a positive integer", key="n_pulses")
        if not self.t_pi > 0:
            raise ValidationError("t_pi must be positive", key="t_pi")
        if self.tau < self.t_pi:
            raise ValidationError(
                f"pulses overlap: tau={self.tau!r} s is shorter than t_pi={self.t_pi!r} s",
                key="tau",
            )
        if not self.sample_rate > 0:
            raise ValidationError("sample_rate must be positive", key="sample_rate")
        if int(self.vertical_bits) != self.vertical_bits or self.vertical_bits < 1:
            raise ValidationError("vertical_bits must be a positive integer", key="vertical_bits")
        if not 0 < self.peak_amplitude <= 1:
            raise ValidationError("peak_amplitude must lie in (0, 1]", key="peak_amplitude")
        if self.resolved_n_samples < self.n_pulses:
            raise ValidationError(
                "fewer samples than pulses; raise sample_rate or tau", key="n_samples"
            )

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def resolved_n_samples(self) -> int:
        if self.n_samples is not None:
            return int(self.n_samples)
        # half-way counts round up, matching the amplitude rounding rule
        return int(math.floor(self.n_pulses * self.tau * self.sample_rate + 0.5))

    @property
    def period(self) -> float:
        """Realized pulse repetition time in seconds."""
        if self.n_samples is None:
            return self.tau
        return self.n_samples / (self.n_pulses * self.sample_rate)


@dataclass(frozen=True, eq=False)
class SampledWaveform:
    samples: np.ndarray
    dt: float
    quantized: bool = False
    vertical_bits: int | None = None
    period: float | None = None
    n_pulses: int | None = None
    modulated: bool = False

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return len(self.samples)

    @property
    def sample_rate(self) -> float:
        return 1.0 / self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dt

    @property
    def duration(self) -> float:
        return len(self.samples) * self.dt


def lobe_profile(offset, t_pi: float, shape: PulseShape | str, half_period: float = np.inf):
    """Envelope of a single pulse as a function of time offset from its centre.

    Same formula as `synth_envelope`, with the lobe clipped to ``|offset| <=
    half_period``. The spin simulator samples pulses through this function.
    """
    shape = PulseShape.parse(shape)
    s = np.abs(np.asarray(offset, dtype=float))
    inside = s <= half_period
    if shape is PulseShape.COSINE_SQUARE:
        x = np.maximum(1.0 - s / t_pi, 0.0)
        y = np.sin(np.pi * x / 2) ** 2
    elif shape is PulseShape.SQUARE:
        y = (s <= t_pi / 2).astype(float)
    else:
        raise ValidationError("ideal pulses have no sampled representation", key="shape")
    return np.where(inside, y, 0.0)


def lobe_support(t_pi: float, shape: PulseShape | str) -> float:
    """Full width of the nonzero part of one pulse."""
    shape = PulseShape.parse(shape)
    if shape is PulseShape.COSINE_SQUARE:
        return 2.0 * t_pi
    if shape is PulseShape.SQUARE:
        return t_pi
    return 0.0


def _phase(spec: WaveformSpec) -> np.ndarray:
    i = np.arange(spec.resolved_n_samples, dtype=float)
    if spec.n_samples is None:
        return i / (spec.tau * spec.sample_rate)
    return i * spec.n_pulses / spec.n_samples


def synth_envelope(spec: WaveformSpec) -> SampledWaveform:
    """Render the amplitude envelope of a shaped DD sequence.

    For the cosine-square shape this is the five-step recipe: wrap the sample
    phase into one period, map distance from the period centre onto a triangle
    of half-width ``t_pi``, clip at zero, and apply ``sin(pi x / 2)**2``.
    """
    if spec.shape is PulseShape.IDEAL:
        raise ValidationError("ideal pulses have no sampled representation", key="shape")
    x = np.mod(_phase(spec), 1.0)
    dist = np.abs(x - 0.5)
    # distance from the period centre in units of the (realized) period
    if spec.shape is PulseShape.COSINE_SQUARE:
        x = 1.0 - (spec.period / spec.t_pi) * dist
        x = np.maximum(x, 0.0)
        y = np.sin(np.pi * x / 2) ** 2
    else:
        y = (dist <= spec.t_pi / (2.0 * spec.period)).astype(float)
    return SampledWaveform(
        samples=spec.peak_amplitude * y,
        dt=spec.dt,
        period=spec.period,
        n_pulses=spec.n_pulses,
    )


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(w: SampledWaveform, bits: int) -> SampledWaveform:
    """Round every sample to the nearest multiple of ``2**-bits``.

    Ties round away from zero. Quantizing an already coarser waveform to a
    finer grid is refused, since it would suggest resolution that is not there.
    """
    if int(bits) != bits or bits < 1:
        raise ValidationError("bits must be a positive integer", key="vertical_bits")
    if w.quantized and w.vertical_bits is not None and w.vertical_bits < bits:
        raise ValidationError(
            f"waveform already quantized to {w.vertical_bits} bits; cannot requantize to {bits}",
            key="vertical_bits",
        )
    scale = float(2**bits)
    samples = _round_half_away(w.samples * scale) / scale
    return replace(w, samples=samples, quantized=True, vertical_bits=int(bits))


def modulate_carrier(w: SampledWaveform, f_carrier: float, phase: float = 0.0) -> SampledWaveform:
    nyquist = 0.5 * w.sample_rate
    if w.modulated:
        raise ValidationError("waveform already carries a carrier", key="carrier")
    if f_carrier < 0:
        raise ValidationError("carrier frequency must be non-negative", key="f_carrier")
    if f_carrier >= nyquist:
        raise ValidationError(
            f"carrier {f_carrier:g} Hz aliases: Nyquist limit is {nyquist:g} Hz", key="f_carrier"
        )
    i = np.arange(len(w.samples), dtype=float)
    carrier = np.sin(2 * np.pi * f_carrier * i * w.dt + phase)
    return replace(w, samples=w.samples * carrier, quantized=False, modulated=True)


def find_lobes(w: SampledWaveform, period: float | None = None) -> list[slice]:
    """Index ranges of the individual pulse lobes.

    With a known period the waveform is cut at period boundaries, which also
    works when neighbouring lobes touch (``tau == t_pi``). Otherwise lobes are
    the contiguous runs of nonzero samples.
    """
    period = period if period is not None else w.period
    n = len(w.samples)
    if period is not None:
        k = np.floor(np.arange(n, dtype=float) / (period * w.sample_rate)).astype(int)
        edges = np.flatnonzero(np.diff(k)) + 1
        bounds = np.concatenate(([0], edges, [n]))
        return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
    nz = np.abs(w.samples) > 0
    if not nz.any():
        return []
    change = np.flatnonzero(np.diff(nz.astype(np.int8))) + 1
    bounds = np.concatenate(([0], change, [n]))
    return [
        slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if nz[a]
    ]


def _lobe(w: SampledWaveform, lobe: int) -> slice:
    lobes = find_lobes(w)
    if not lobes:
        raise ValidationError("waveform has no pulse lobes")
    try:
        sl = lobes[lobe]
    except IndexError:
        raise ValidationError(f"lobe {lobe} out of range ({len(lobes)} lobes)") from None
    if not np.any(w.samples[sl] != 0):
        raise ValidationError(f"lobe {lobe} is empty")
    return sl


def measure_pulse_centers(w: SampledWaveform, spec: WaveformSpec) -> np.ndarray:
    """Centroid of each pulse lobe, in seconds from the first sample."""
    if w.modulated:
        raise ValidationError("centroids need the bare envelope, not a modulated waveform")
    lobes = find_lobes(w, spec.period)
    t = w.times
    centers = []
    for k, sl in enumerate(lobes):
        y = w.samples[sl]
        total = y.sum()
        if total <= 0:
            raise ValidationError(f"no lobe found in period {k}")
        centers.append(np.dot(t[sl], y) / total)
    if not centers:
        raise ValidationError("no lobe found")
    return np.asarray(centers)


def envelope_area(w: SampledWaveform, lobe: int = 0) -> float:
    """Time integral of one lobe (rectangle rule), in seconds."""
    sl = _lobe(w, lobe)
    return float(w.samples[sl].sum() * w.dt)


def envelope_fwhm(w: SampledWaveform, lobe: int = 0) -> float:
    sl = _lobe(w, lobe)
    y = w.samples[sl]
    ipk = int(np.argmax(y))
    half = 0.5 * y[ipk]

    left = ipk
    while left > 0 and y[left - 1] >= half:
        left -= 1
    right = ipk
    while right < len(y) - 1 and y[right + 1] >= half:
        right += 1
    if left == 0 or right == len(y) - 1:
        raise ValidationError("half-maximum crossing not resolved inside the lobe")

    # linear interpolation between the straddling samples
    t_left = (left - 1) + (half - y[left - 1]) / (y[left] - y[left - 1])
    t_right = right + (y[right] - half) / (y[right] - y[right + 1])
    return float((t_right - t_left) * w.dt)


def export_waveform(w: SampledWaveform, path, fmt: str = "csv") -> None:
    """Write a waveform as CSV or as the ``DDWF`` little-endian int16 format."""
    path = Path(path)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "time_s", "amplitude"])
        for i, (t, a) in enumerate(zip(w.times, w.samples)):
            writer.writerow([i, repr(float(t)), repr(float(a))])
        atomic_write_text(path, buf.getvalue())
    elif fmt == "binary":
        if np.any(np.abs(w.samples) > 1):
            raise ValidationError("binary export needs samples in [-1, 1]")
        rate = int(round(w.sample_rate))
        if not 0 < rate < 2**32:
            raise ValidationError("sample rate does not fit the binary header")
        codes = _round_half_away(w.samples * BINARY_FULL_SCALE).astype("<i2")
        header = BINARY_MAGIC + struct.pack("<II", len(codes), rate)
        atomic_write_bytes(path, header + codes.tobytes())
    else:
        raise ValidationError(f"unknown waveform format {fmt!r}", key="format")


def read_waveform(path, fmt: str | None = None) -> SampledWaveform:
    path = Path(path)
    if fmt is None:
        with open(path, "rb") as fh:
            fmt = "binary" if fh.read(4) == BINARY_MAGIC else "csv"
    if fmt == "binary":
        data = path.read_bytes()
        if data[:4] != BINARY_MAGIC:
            raise ValueError(f"{path}: not a DDWF file")
        count, rate = struct.unpack("<II", data[4:12])
        codes = np.frombuffer(data[12:], dtype="<i2")
        if len(codes) != count:
            raise ValueError(f"{path}: header says {count} samples, found {len(codes)}")
        return SampledWaveform(samples=codes / BINARY_FULL_SCALE, dt=1.0 / rate)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["index", "time_s", "amplitude"]:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = [(float(t), float(a)) for _, t, a in reader]
    times = np.array([r[0] for r in rows])
    samples = np.array([r[1] for r in rows])
    dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
    return SampledWaveform(samples=samples, dt=dt)


def binary_codes(path) -> np.ndarray:
    data = Path(path).read_bytes()
    return np.frombuffer(data[12:], dtype="<i2").copy()
