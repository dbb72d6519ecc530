"""Command-line front end: ``ddshaper <verb> [--config FILE] [flags]``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_text
from .analytic import AcSignal, SensorModel, SequenceParams, filter_weight, resonant_tau, scan_response
from .config import EXPERIMENT_KINDS, load_config, normalize_table, parse_assignment, set_value
from .envelope import PulseShape, WaveformSpec, export_waveform, modulate_carrier, quantize, synth_envelope
from .errors import ValidationError
from .harness import ExperimentSpec, NoResonanceError, RUNNERS, find_resonance, run_experiment, write_run
from .scan import _json_default, write_scans
from .spinsim import C13_LARMOR, FIG4B_COUPLING, DriveParams, NuclearBath, compare_pulse_shapes, scan_sequence

OUT_ENV = "DDSHAPER_OUT"

# flag -> (section, key with unit suffix, type, help)
_SEQ = {
    "--n-pulses": ("sequence", "n_pulses", int, "number of pi pulses N"),
    "--tau-ns": ("sequence", "tau_ns", float, "pulse repetition time"),
    "--t-pi-ns": ("sequence", "t_pi_ns", float, "pi-pulse duration (lobe FWHM)"),
    "--shape": ("sequence", "shape", str, "ideal, square or cosine"),
}
_SIGNAL = {
    "--f-ac-mhz": ("signals", "f_ac_mhz", float, "AC signal frequency"),
    "--b-ac-ut": ("signals", "b_ac_ut", float, "AC signal amplitude"),
}
_TAU_SCAN = {
    "--tau-start-ns": ("scan", "tau_start_ns", float, "first tau of the scan"),
    "--tau-step-ps": ("scan", "tau_step_ps", float, "tau increment"),
    "--n-points": ("scan", "n_points", int, "number of scan points"),
}
_F_SCAN = {
    "--f-start-mhz": ("scan", "f_start_mhz", float, "first frequency of the scan"),
    "--f-stop-mhz": ("scan", "f_stop_mhz", float, "last frequency of the scan"),
}
_SPIN = {
    "--n-pulses": _SEQ["--n-pulses"],
    "--t-pi-ns": _SEQ["--t-pi-ns"],
    "--phase-cycle": ("sequence", "phase_cycle", str, "cpmg or xy8"),
    "--detuning-mhz": ("drive", "detuning_mhz", float, "drive detuning (cyclic)"),
    "--substeps": ("drive", "substeps_per_sample", int, "integration segments per DAC sample"),
    "--larmor-mhz": ("bath", "larmor_mhz", float, "13C Larmor frequency (cyclic)"),
    **_TAU_SCAN,
    **_F_SCAN,
}

FLAGS = {
    "waveform": {
        **_SEQ,
        "--sample-rate-mhz": ("waveform", "sample_rate_mhz", float, "DAC sample rate"),
        "--vertical-bits": ("waveform", "vertical_bits", int, "DAC resolution in bits"),
        "--n-samples": ("waveform", "n_samples", int, "force the sample count"),
        "--peak-amplitude": ("waveform", "peak_amplitude", float, "lobe peak in (0, 1]"),
        "--carrier-mhz": ("waveform", "carrier_mhz", float, "optional carrier frequency"),
        "--carrier-phase": ("waveform", "carrier_phase", float, "carrier phase in rad"),
    },
    "filter": {
        "--n-pulses": _SEQ["--n-pulses"],
        "--tau-ns": _SEQ["--tau-ns"],
        "--f-ac-mhz": ("signals", "f_ac_mhz", float, "evaluate at this frequency"),
        **_F_SCAN,
        "--n-points": _TAU_SCAN["--n-points"],
    },
    "response": {
        "--n-pulses": _SEQ["--n-pulses"],
        **_SIGNAL,
        "--t2-us": ("sensor", "t2_us", float, "coherence time"),
        **_TAU_SCAN,
    },
    "simulate": {**_SPIN, "--shape": _SEQ["--shape"],
                 "--vertical-bits": ("drive", "vertical_bits", int, "round pulse amplitudes to this many bits")},
    "compare": {**_SPIN, "--shapes": ("scan", "shapes", str, "comma-separated labels: ideal,square,cosine,cosine14")},
    "reproduce": {},
}

HELP = {
    "waveform": "synthesize a shaped pulse train",
    "filter": "evaluate the filter weight",
    "response": "analytic p(tau) scan for classical AC signals",
    "simulate": "spin-bath simulation of p(tau)",
    "compare": "compare pulse shapes in the spin-bath simulation",
    "reproduce": "run a figure experiment",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddshaper", description="Shaped-pulse dynamical decoupling toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, flags in FLAGS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", type=Path, help="TOML config or params.json echo")
        p.add_argument("--out", type=Path, help=f"output directory (output.dir; default ${OUT_ENV}/{name})")
        p.add_argument("--threads", type=int, help="cap on worker processes (output.threads)")
        p.add_argument("--format", choices=["csv", "binary"], help="waveform file format (output.format)")
        p.add_argument("--plot", action="store_true", default=None, help="also write a gnuplot script (output.plot)")
        for flag, (section, key, typ, text) in flags.items():
            p.add_argument(flag, type=typ, dest=f"{section}.{key}", help=f"{text} ({section}.{key})")
        if name == "reproduce":
            p.add_argument("figure", nargs="?", help=f"one of {', '.join(RUNNERS)} (prefix allowed)")
            p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                           help="override a runner parameter (overrides.KEY)")
    return parser


def _require(section: dict, key: str, where: str):
    if section.get(key) is None:
        raise ValidationError(f"missing {where}.{key}", key=f"{where}.{key}")
    return section[key]


def _resolve_out(args, cfg, name) -> Path:
    if args.out is not None:
        return args.out
    if cfg.get("output", {}).get("dir"):
        return Path(cfg["output"]["dir"])
    return Path(os.environ.get(OUT_ENV, "ddshaper_out")) / name


def _echo(out: Path, command: str, cfg: dict) -> None:
    body = {k: v for k, v in cfg.items() if k != "output"}
    payload = {"command": command, "version": __version__, "config": body}
    atomic_write_text(out / "params.json", json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _summary(out: Path, summary: dict) -> None:
    atomic_write_text(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n")


def _plot_script(out: Path, data: str, x: str, y: str, using: str, label_col: bool = False) -> None:
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set xlabel '{x}'",
        f"set ylabel '{y}'",
        "set terminal pngcairo size 900,600",
        f"set output '{Path(data).stem}.png'",
    ]
    if label_col:
        lines.append(f"plot '{data}' using {using} with linespoints")
    else:
        lines.append(f"plot '{data}' using {using} with linespoints notitle")
    atomic_write_text(out / f"{Path(data).stem}.gp", "\n".join(lines) + "\n")


def _sensor(cfg) -> SensorModel:
    s = cfg.get("sensor", {})
    kw = {k: s[k] for k in ("gamma", "t2") if s.get(k) is not None}
    return SensorModel(**kw)


def _signals(cfg) -> list[AcSignal]:
    return [AcSignal(_require(s, "f_ac", "signals"), s.get("b_ac", 0.0)) for s in cfg.get("signals", [])]


def cmd_waveform(cfg, out: Path) -> dict:
    seq, wf = cfg.get("sequence", {}), cfg.get("waveform", {})
    spec = WaveformSpec(
        n_pulses=_require(seq, "n_pulses", "sequence"),
        tau=_require(seq, "tau", "sequence"),
        t_pi=seq.get("t_pi", 25e-9),
        sample_rate=wf.get("sample_rate", 5e8),
        vertical_bits=wf.get("vertical_bits", 14),
        shape=seq.get("shape", PulseShape.COSINE_SQUARE),
        peak_amplitude=wf.get("peak_amplitude", 1.0),
        n_samples=wf.get("n_samples"),
    )
    w = synth_envelope(spec)
    if wf.get("carrier"):
        w = modulate_carrier(w, wf["carrier"], wf.get("carrier_phase", 0.0))
    w = quantize(w, spec.vertical_bits)
    fmt = cfg.get("output", {}).get("format", "csv")
    name = "waveform.csv" if fmt == "csv" else "waveform.bin"
    export_waveform(w, out / name, fmt)
    if cfg.get("output", {}).get("plot") and fmt == "csv":
        _plot_script(out, name, "time (s)", "amplitude", "2:3")
    return {"file": name, "n_samples": len(w), "period_s": spec.period, "sample_rate_hz": spec.sample_rate}


def cmd_filter(cfg, out: Path) -> dict:
    seq = cfg.get("sequence", {})
    params = SequenceParams(_require(seq, "n_pulses", "sequence"), _require(seq, "tau", "sequence"))
    scan = cfg.get("scan", {})
    if cfg.get("signals"):
        f = np.array([_require(s, "f_ac", "signals") for s in cfg["signals"]])
    elif scan.get("f_start") is not None:
        f = np.linspace(scan["f_start"], _require(scan, "f_stop", "scan"), scan.get("n_points", 1001))
    else:
        f = np.array([1.0 / (2.0 * params.tau)])
    w = np.atleast_1d(filter_weight(f, params))
    lines = ["f_hz,weight"] + [f"{float(a)!r},{float(b)!r}" for a, b in zip(f, w)]
    atomic_write_text(out / "filter.csv", "\n".join(lines) + "\n")
    if cfg.get("output", {}).get("plot"):
        _plot_script(out, "filter.csv", "frequency (Hz)", "W", "1:2")
    i = int(np.argmax(w))
    return {"max_weight": float(w[i]), "f_at_max_hz": float(f[i]), "n_frequencies": len(f)}


def _tau_grid(scan: dict, default_center: float | None = None, default_step: float | None = None) -> np.ndarray:
    if scan.get("f_start") is not None:
        f = np.linspace(scan["f_start"], _require(scan, "f_stop", "scan"), scan.get("n_points", 61))
        return 1.0 / (2.0 * f)
    n = scan.get("n_points", 401)
    if scan.get("tau_start") is None and default_center is None:
        raise ValidationError("missing scan.tau_start (or scan.f_start/f_stop)", key="scan.tau_start")
    step = scan.get("tau_step", default_step)
    if step is None:
        raise ValidationError("missing scan.tau_step", key="scan.tau_step")
    start = scan.get("tau_start")
    if start is None:
        start = default_center - 0.5 * (n - 1) * step
    return start + np.arange(n) * step


def _resonance_summary(scan) -> dict:
    try:
        tau_min, width = find_resonance(scan)
        return {"tau_min_s": tau_min, "linewidth_s": width, "p_min": float(scan.p_values.min())}
    except NoResonanceError as exc:
        return {"resonance": str(exc)}


def _write_scan_outputs(out, scans, cfg, label=None):
    write_scans(out / "scan.csv", scans, label_column=label)
    if cfg.get("output", {}).get("plot"):
        _plot_script(out, "scan.csv", "tau (s)", "p", "1:3", label_col=bool(label))


def cmd_response(cfg, out: Path) -> dict:
    seq = cfg.get("sequence", {})
    n = _require(seq, "n_pulses", "sequence")
    signals = _signals(cfg)
    if not signals:
        raise ValidationError("missing [[signals]] entry", key="signals")
    tau0 = resonant_tau(signals[0].f_ac)
    scan_cfg = cfg.get("scan", {})
    start = scan_cfg.get("tau_start")
    step = scan_cfg.get("tau_step", tau0 / (20.0 * n))
    npts = scan_cfg.get("n_points", 401)
    if start is None:
        start = tau0 - 0.5 * (npts - 1) * step
    scan = scan_response(SequenceParams(n, start), start, step, npts, signals, _sensor(cfg))
    _write_scan_outputs(out, {None: scan}, cfg)
    return {"tau_step_s": step, **_resonance_summary(scan)}


def _spin_setup(cfg):
    seq, drv, bath = cfg.get("sequence", {}), cfg.get("drive", {}), cfg.get("bath", {})
    couplings = bath.get("couplings") or [list(FIG4B_COUPLING)]
    b = NuclearBath(bath.get("larmor", C13_LARMOR), tuple(tuple(c) for c in couplings))
    t_pi = seq.get("t_pi", 25e-9)
    drive = DriveParams.pi_pulse(
        t_pi,
        shape=seq.get("shape", PulseShape.COSINE_SQUARE),
        detuning=drv.get("detuning", 0.0),
        substeps_per_sample=drv.get("substeps_per_sample", 4),
        sample_rate=drv.get("sample_rate", 5e8),
        vertical_bits=drv.get("vertical_bits"),
    )
    n = _require(seq, "n_pulses", "sequence")
    taus = _tau_grid(cfg.get("scan", {}))
    return n, taus, drive, b, seq.get("phase_cycle", "cpmg")


def _threads(cfg) -> int:
    return int(cfg.get("output", {}).get("threads") or 1)


def cmd_simulate(cfg, out: Path) -> dict:
    n, taus, drive, bath, cycle = _spin_setup(cfg)
    scan = scan_sequence(n, taus, drive, bath, cycle, _threads(cfg))
    _write_scan_outputs(out, {None: scan}, cfg)
    return _resonance_summary(scan)


def cmd_compare(cfg, out: Path) -> dict:
    n, taus, drive, bath, cycle = _spin_setup(cfg)
    shapes = cfg.get("scan", {}).get("shapes") or ["ideal", "square", "cosine", "cosine14"]
    scans, diffs = compare_pulse_shapes(n, taus, drive, bath, tuple(shapes), cycle, _threads(cfg))
    _write_scan_outputs(out, scans, cfg, label="shape")
    if diffs:
        keys = sorted(diffs)
        lines = [",".join(["tau_s"] + keys)]
        for i, t in enumerate(taus):
            lines.append(",".join([repr(float(t))] + [repr(float(diffs[k][i])) for k in keys]))
        atomic_write_text(out / "diffs.csv", "\n".join(lines) + "\n")
    summary = {"max_abs_dp": {k: float(np.max(np.abs(v))) for k, v in diffs.items()}}
    if "cosine" in scans and "cosine14" in scans:
        summary["max_abs_cosine14_vs_cosine"] = float(
            np.max(np.abs(scans["cosine14"].p_values - scans["cosine"].p_values)))
    return summary


def _figure_kind(name: str) -> str:
    if name in RUNNERS:
        return name
    matches = [k for k in RUNNERS if k.startswith(name)]
    if len(matches) != 1:
        raise ValidationError(f"unknown or ambiguous figure {name!r}; choose from {', '.join(RUNNERS)}", key="figure")
    return matches[0]


def cmd_reproduce(args, cfg) -> Path:
    kind = args.figure or cfg.get("experiment", {}).get("kind")
    if not kind:
        raise ValidationError("no figure given", key="figure")
    kind = _figure_kind(kind)
    overrides = dict(cfg.get("overrides", {}))
    for text in args.set:
        key, value = parse_assignment(text)
        overrides.update(normalize_table({key: value}, EXPERIMENT_KINDS, "overrides."))
    result = run_experiment(ExperimentSpec(kind, overrides), threads=_threads(cfg))
    out = _resolve_out(args, cfg, kind)
    write_run(result, out)
    if cfg.get("output", {}).get("plot"):
        _plot_script(out, "scan.csv", "tau (s)", "p", "1:3", label_col=len(result.scans) > 1)
    return out


COMMANDS = {
    "waveform": cmd_waveform,
    "filter": cmd_filter,
    "response": cmd_response,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def _merge_flags(args, cfg: dict) -> dict:
    out = cfg.setdefault("output", {})
    for name in ("threads", "format", "plot"):
        value = getattr(args, name, None)
        if value is not None:
            out[name] = value
    for dest, value in vars(args).items():
        if "." in dest and value is not None:
            section, key = dest.split(".", 1)
            set_value(cfg, section, key, value)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else {}
        cfg = _merge_flags(args, cfg)
        if args.threads is not None and args.threads < 1:
            raise ValidationError("--threads must be at least 1", key="threads")
        if args.command == "reproduce":
            out = cmd_reproduce(args, cfg)
        else:
            out = _resolve_out(args, cfg, args.command)
            out.mkdir(parents=True, exist_ok=True)
            summary = COMMANDS[args.command](cfg, out)
            _summary(out, {"command": args.command, "version": __version__, **summary})
            _echo(out, args.command, cfg)
    except ValidationError as exc:
        print(f"ddshaper: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort handler maps to exit 1
        print(f"ddshaper: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0
