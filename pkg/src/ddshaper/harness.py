"""
Named experiment runners (``fig2_square`` ... ``figS1_shapes``).

Each runner has a table of defaults in SI units, so a bare run reproduces its
experiment. Scan ranges that were chosen by eye are flagged as approximate
next to the default.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_text
from .analytic import (
    AcSignal,
    SensorModel,
    SequenceParams,
    frequency_step,
    interpolated_resolution,
    resonant_tau,
    scan_response,
)
from .envelope import PulseShape, WaveformSpec, measure_pulse_centers, quantize, synth_envelope
from .errors import ValidationError
from .scan import ScanResult, _json_default, write_scans
from .spinsim import (
    C13_LARMOR,
    FIG4B_COUPLING,
    DriveParams,
    HyperfineCoupling,
    NuclearBath,
    compare_pulse_shapes,
    conditional_frequencies,
    scan_sequence,
)

F_TEST = 9.746969e6
T_SAMPLE = 2e-9


@dataclass
class ExperimentSpec:
    kind: str
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in RUNNERS:
            raise ValidationError(
                f"unknown experiment {self.kind!r}; choose from {', '.join(RUNNERS)}", key="kind"
            )
        defaults = DEFAULTS[self.kind]
        unknown = sorted(set(self.overrides) - set(defaults))
        if unknown:
            raise ValidationError(
                f"unknown parameter(s) for {self.kind}: {', '.join(unknown)}", key=unknown[0]
            )

    def params(self) -> dict:
        p = dict(DEFAULTS[self.kind])
        p.update(self.overrides)
        return p


@dataclass
class RunResult:
    kind: str
    scans: dict
    summary: dict
    params: dict
    label_column: str = "series"
    tables: dict = field(default_factory=dict)


class NoResonanceError(ValueError):
    pass


def _half_crossing(x, d, i, half, step):
    j = i
    while 0 <= j + step < len(d) and d[j + step] > half:
        j += step
    k = j + step
    if not 0 <= k < len(d):
        raise NoResonanceError("dip is not contained in the scan")
    return x[j] + (d[j] - half) / (d[j] - d[k]) * (x[k] - x[j])


def dip_width(scan: ScanResult, index: int) -> float:
    """Full width at half depth of the ``1 - p`` dip around ``index``.

    Depth is measured from the smallest ``1 - p`` in the scan, which is the
    off-resonance floor (nonzero once decoherence is included).
    """
    d = 1.0 - scan.p_values
    half = 0.5 * (d[index] + d.min())
    x = scan.tau_values
    return abs(float(_half_crossing(x, d, index, half, +1) - _half_crossing(x, d, index, half, -1)))


def _parabolic_min(x, y, i) -> float:
    denom = y[i - 1] - 2 * y[i] + y[i + 1]
    if denom <= 0:
        return float(x[i])
    shift = 0.5 * (y[i - 1] - y[i + 1]) / denom
    return float(x[i] + shift * (x[i + 1] - x[i]))


def find_resonance(scan: ScanResult) -> tuple[float, float]:
    """Location (parabolic interpolation) and FWHM of the deepest dip."""
    p = scan.p_values
    i = int(np.argmin(p))
    if i == 0 or i == len(p) - 1:
        raise NoResonanceError("no interior minimum in the scan")
    return _parabolic_min(scan.tau_values, p, i), dip_width(scan, i)


def find_minima(scan: ScanResult, count: int = 2) -> list[int]:
    """Indices of the ``count`` deepest interior local minima, in tau order."""
    p = scan.p_values
    idx = [i for i in range(1, len(p) - 1) if p[i] < p[i - 1] and p[i] <= p[i + 1]]
    idx.sort(key=lambda i: p[i])
    return sorted(idx[:count])


def sign_changes(scan: ScanResult) -> np.ndarray:
    """Tau positions where the contrast ``2p - 1`` changes sign (linear interpolation)."""
    c = 2 * scan.p_values - 1
    x = scan.tau_values
    j = np.flatnonzero(np.sign(c[:-1]) * np.sign(c[1:]) < 0)
    return x[j] + c[j] / (c[j] - c[j + 1]) * (x[j + 1] - x[j])


# ---------------------------------------------------------------- runners


def _signal(params) -> AcSignal:
    return AcSignal(params["f_ac"], params["b_ac"])


def _centred_scan(center, step, n_points):
    return center - 0.5 * (n_points - 1) * step


def run_fig2(params, square: bool):
    seq = SequenceParams(
        params["n_pulses"], resonant_tau(params["f_ac"]), params["t_pi"],
        PulseShape.SQUARE if square else PulseShape.COSINE_SQUARE,
    )
    sensor = SensorModel(params["gamma"], params["t2"])
    step = params["tau_step"]
    if square:
        # square pulses can only sit on the sample grid
        start = np.ceil(params["tau_start"] / T_SAMPLE - 1e-9) * T_SAMPLE
        step = T_SAMPLE
    else:
        start = params["tau_start"]
    scan = scan_response(seq, start, step, params["n_points"], [_signal(params)], sensor)
    tau_min, width = find_resonance(scan)
    summary = {
        "tau_min_s": tau_min,
        "linewidth_s": width,
        "tau_step_s": step,
        "expected_tau_s": resonant_tau(params["f_ac"]),
        "frequency_step_hz": frequency_step(step, params["f_ac"]),
    }
    if not square:
        summary["timing_resolution_s"] = interpolated_resolution(params["t_pi"], params["vertical_bits"])
        summary["waveform_center_residual_s"] = _waveform_check(params, tau_min)
    return {"scan": scan}, summary


def _waveform_check(params, tau) -> float:
    """Largest centroid error of the pulses in a synthesized, quantized train."""
    spec = WaveformSpec(params["n_pulses"], tau, params["t_pi"], vertical_bits=params["vertical_bits"])
    w = quantize(synth_envelope(spec), spec.vertical_bits)
    centers = measure_pulse_centers(w, spec)
    requested = (np.arange(spec.n_pulses) + 0.5) * tau
    return float(np.max(np.abs(centers - requested)))


def run_fig3_scaling(params):
    sensor = SensorModel(params["gamma"], params["t2"])
    tau0 = resonant_tau(params["f_ac"])
    scans, widths = {}, {}
    summary = {"per_n": {}}
    for n in params["n_list"]:
        n = int(n)
        # window in units of the distance from the centre to the first filter null
        null = 2 * tau0 / n
        step = 2 * params["window_nulls"] * null / (params["n_points"] - 1)
        start = _centred_scan(tau0, step, params["n_points"])
        scan = scan_response(SequenceParams(n, tau0), start, step, params["n_points"], [_signal(params)], sensor)
        tau_min, width = find_resonance(scan)
        zeros = sign_changes(scan)
        scans[str(n)] = scan
        widths[n] = width
        summary["per_n"][str(n)] = {
            "tau_min_s": tau_min,
            "linewidth_s": width,
            "tau_step_s": step,
            "sign_changes": len(zeros),
            "sign_change_tau_s": zeros.tolist(),
            "peak_bessel_argument": 2 / np.pi * sensor.gamma * params["b_ac"] * n * tau0,
        }
    ns = sorted(widths)
    if len(ns) >= 2:
        a, b = ns[0], ns[1]
        ratio = widths[b] / widths[a]
        summary["linewidth_ratio"] = {"pair": [a, b], "measured": ratio, "expected": a / b,
                                      "relative_error": abs(ratio / (a / b) - 1)}
    return scans, summary


def run_fig3_zoom(params):
    sensor = SensorModel(params["gamma"], params["t2"])
    tau0 = resonant_tau(params["f_ac"])
    step = params["tau_step"]
    start = _centred_scan(tau0, step, params["n_points"])
    seq = SequenceParams(params["n_pulses"], tau0)
    scan = scan_response(seq, start, step, params["n_points"], [_signal(params)], sensor)
    fine = frequency_step(step, params["f_ac"])
    coarse = frequency_step(params["t_sample"], params["f_ac"])
    summary = {
        "tau_step_s": step,
        "frequency_step_hz": fine,
        "frequency_step_square_hz": coarse,
        "improvement": coarse / fine,
        "sign_changes": len(sign_changes(scan)),
    }
    return {"scan": scan}, summary


def twotone_default_n(tau: float, max_bandwidth: float = 1e3) -> int:
    """Smallest even N with 1/(N tau) <= max_bandwidth."""
    n = int(np.ceil(1.0 / (max_bandwidth * tau) - 1e-9))
    return n + (n % 2)


def run_fig4_twotone(params):
    f1 = params["f_ac"]
    f2 = f1 + params["delta_f"]
    tau1, tau2 = resonant_tau(f1), resonant_tau(f2)
    n = params["n_pulses"] or twotone_default_n(tau1)
    sensor = SensorModel(params["gamma"], params["t2"])
    signals = [AcSignal(f1, params["b_ac"]), AcSignal(f2, params["b_ac"])]
    margin = params["margin_nulls"] * 2 * tau1 / n
    step = params["tau_step"]
    start = tau2 - margin
    n_points = int(np.ceil((tau1 + margin - start) / step)) + 1
    scan = scan_response(SequenceParams(n, tau1), start, step, n_points, signals, sensor)
    minima = find_minima(scan, 2)
    widths = [dip_width(scan, i) for i in minima]
    positions = [_parabolic_min(scan.tau_values, scan.p_values, i) for i in minima]
    separation = abs(positions[1] - positions[0]) if len(positions) == 2 else 0.0
    d = 1.0 - scan.p_values
    depths = [float(d[i] - d.min()) for i in minima]
    # a filter sidelobe is a local minimum too, but a much shallower one
    comparable = len(depths) == 2 and min(depths) >= 0.5 * max(depths)
    summary = {
        "n_pulses": n,
        "bandwidth_hz": 1.0 / (n * tau1),
        "minima_tau_s": positions,
        "minima_f_equiv_hz": [1 / (2 * t) for t in positions],
        "linewidths_s": widths,
        "separation_s": separation,
        "expected_separation_s": tau1 - tau2,
        "tau_step_s": step,
        "depths": depths,
        "resolved": comparable and separation > max(widths),
    }
    return {"scan": scan}, summary


def _bath(params) -> NuclearBath:
    couplings = [HyperfineCoupling(params["a_par"], params["a_perp"])]
    couplings += [HyperfineCoupling(*c) for c in params["extra_couplings"]]
    return NuclearBath(params["larmor"], tuple(couplings))


def _drive(params, shape) -> DriveParams:
    return DriveParams.pi_pulse(
        params["t_pi"],
        shape=shape,
        detuning=params["detuning"],
        substeps_per_sample=params["substeps_per_sample"],
    )


def _tau_window(params):
    f = np.linspace(params["f_start"], params["f_stop"], params["n_points"])
    return 1.0 / (2.0 * f)


def run_fig4_c13(params, threads=1):
    bath = _bath(params)
    taus = _tau_window(params)
    scan = scan_sequence(params["n_pulses"], taus, _drive(params, params["shape"]), bath,
                         params["phase_cycle"], threads)
    w0, w1 = conditional_frequencies(bath)
    summary = {"predicted_f_hz": (w0 + w1) / 2 / (2 * np.pi)}
    try:
        tau_min, width = find_resonance(scan)
        summary.update(tau_min_s=tau_min, f_equiv_min_hz=1 / (2 * tau_min), linewidth_s=width,
                       p_min=float(scan.p_values.min()))
    except NoResonanceError as exc:
        summary["resonance"] = str(exc)
    return {"scan": scan}, summary


def run_figS1(params, threads=1):
    bath = _bath(params)
    taus = _tau_window(params)
    drive = _drive(params, PulseShape.COSINE_SQUARE)
    scans, diffs = compare_pulse_shapes(params["n_pulses"], taus, drive, bath,
                                        phase_cycle=params["phase_cycle"], threads=threads)
    p = {k: v.p_values for k, v in scans.items()}
    quant = float(np.max(np.abs(p["cosine14"] - p["cosine"])))
    sq_cos = float(np.max(np.abs(p["square"] - p["cosine"])))
    finite_ideal = float(max(np.max(np.abs(diffs["dp_square"])), np.max(np.abs(diffs["dp_cosine"]))))
    summary = {
        "max_abs_dp": {k: float(np.max(np.abs(v))) for k, v in diffs.items()},
        "max_abs_cosine14_vs_cosine": quant,
        "max_abs_square_vs_cosine": sq_cos,
        "max_abs_finite_vs_ideal": finite_ideal,
        "quantization_below_1e-6": quant < 1e-6,
        "square_vs_cosine_small": sq_cos <= finite_ideal,
    }
    header = ["tau_s", "dp_square", "dp_cosine", "dp_cosine14"]
    rows = zip(taus, diffs["dp_square"], diffs["dp_cosine"], diffs["dp_cosine14"])
    return scans, summary, {"diffs.csv": (header, list(rows))}


_SENSOR = {"gamma": 2 * np.pi * 28e9, "t2": None}
_SPIN = {
    "n_pulses": 320,
    "t_pi": 25e-9,
    "larmor": C13_LARMOR,
    "a_par": FIG4B_COUPLING[0],
    "a_perp": FIG4B_COUPLING[1],
    "extra_couplings": [],
    "detuning": 0.0,
    "substeps_per_sample": 4,
    "phase_cycle": "cpmg",
    # approximate: frequency axis 1/(2 tau) around the 13C line
    "f_start": 1.90e6,
    "f_stop": 2.20e6,
    "n_points": 61,
}

# n_pulses=48 for the fig2 runners and the tau windows of fig2/fig3 are
# approximate choices; the B field keeps the N=48 dip short of the first J0 zero
DEFAULTS = {
    "fig2_square": {**_SENSOR, "f_ac": F_TEST, "b_ac": 7.15e-6, "n_pulses": 48, "t_pi": 25e-9,
                    "tau_start": 40e-9, "tau_step": T_SAMPLE, "n_points": 12, "vertical_bits": 14},
    "fig2_shaped": {**_SENSOR, "f_ac": F_TEST, "b_ac": 7.15e-6, "n_pulses": 48, "t_pi": 25e-9,
                    "tau_start": 46e-9, "tau_step": 0.05e-9, "n_points": 221, "vertical_bits": 14},
    "fig3_scaling": {"gamma": _SENSOR["gamma"], "t2": 535e-6, "f_ac": F_TEST, "b_ac": 0.84e-6,
                     "n_list": [192, 672, 10000], "n_points": 4001, "window_nulls": 3.0},
    "fig3_zoom": {"gamma": _SENSOR["gamma"], "t2": 535e-6, "f_ac": F_TEST, "b_ac": 0.84e-6,
                  "n_pulses": 10000, "tau_step": 0.6e-12, "n_points": 201, "t_sample": T_SAMPLE},
    "fig4_twotone": {**_SENSOR, "f_ac": F_TEST, "delta_f": 3e3, "b_ac": 5e-9, "n_pulses": None,
                     "tau_step": 0.1e-12, "margin_nulls": 3.0},
    "fig4_c13": {**_SPIN, "shape": "cosine", "n_points": 121},
    "figS1_shapes": dict(_SPIN),
}

RUNNERS = {
    "fig2_square": lambda p, t: run_fig2(p, square=True),
    "fig2_shaped": lambda p, t: run_fig2(p, square=False),
    "fig3_scaling": lambda p, t: run_fig3_scaling(p),
    "fig3_zoom": lambda p, t: run_fig3_zoom(p),
    "fig4_twotone": lambda p, t: run_fig4_twotone(p),
    "fig4_c13": run_fig4_c13,
    "figS1_shapes": run_figS1,
}


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> RunResult:
    params = spec.params()
    out = RUNNERS[spec.kind](params, threads)
    scans, summary = out[0], out[1]
    tables = out[2] if len(out) > 2 else {}
    label = {"figS1_shapes": "shape", "fig3_scaling": "n_pulses"}.get(spec.kind, "series")
    return RunResult(spec.kind, scans, summary, params, label, tables)


def write_run(result: RunResult, out_dir) -> Path:
    """Write ``scan.csv``, ``summary.json`` and ``params.json`` (atomically)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if len(result.scans) == 1:
        write_scans(out / "scan.csv", result.scans, label_column=None)
    else:
        write_scans(out / "scan.csv", result.scans, label_column=result.label_column)
    for name, (header, rows) in result.tables.items():
        lines = [",".join(header)]
        lines += [",".join(repr(float(v)) for v in row) for row in rows]
        atomic_write_text(out / name, "\n".join(lines) + "\n")
    dump = lambda obj: json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    atomic_write_text(out / "summary.json", dump({"kind": result.kind, "version": __version__, **result.summary}))
    atomic_write_text(out / "params.json", dump({"kind": result.kind, "params": result.params}))
    return out
