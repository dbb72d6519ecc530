"""Sampled p(tau) spectra and their CSV/JSON on-disk form."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_text

P_TOLERANCE = 1e-12


@dataclass(eq=False)
class ScanResult:
    tau_values: np.ndarray
    p_values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau_values = np.asarray(self.tau_values, dtype=float)
        self.p_values = np.asarray(self.p_values, dtype=float)
        if self.tau_values.shape != self.p_values.shape or self.tau_values.ndim != 1:
            raise ValueError("tau_values and p_values must be 1-D and of equal length")
        if np.any(self.p_values < -P_TOLERANCE) or np.any(self.p_values > 1 + P_TOLERANCE):
            raise ValueError("probabilities outside [0, 1]")

    def __len__(self):
        return len(self.tau_values)

    @property
    def f_equiv(self) -> np.ndarray:
        return 1.0 / (2.0 * self.tau_values)

    def to_csv(self, path, sidecar: bool = True) -> None:
        write_scans(path, {None: self}, label_column=None)
        if sidecar:
            write_sidecar(Path(path).with_suffix(".json"), self.metadata)

    @classmethod
    def from_csv(cls, path) -> "ScanResult":
        path = Path(path)
        tau, p = [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                tau.append(float(row["tau_s"]))
                p.append(float(row["p"]))
        meta_path = path.with_suffix(".json")
        meta = json.loads(meta_path.read_text())["params"] if meta_path.exists() else {}
        return cls(np.array(tau), np.array(p), meta)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_scans(path, scans: dict, label_column: str | None = "series") -> None:
    """Write one or more scans to a single CSV in long format.

    Columns are ``tau_s,f_equiv_hz,p`` plus ``label_column`` when given.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["tau_s", "f_equiv_hz", "p"]
    if label_column:
        header.append(label_column)
    writer.writerow(header)
    for label, scan in scans.items():
        for tau, f, p in zip(scan.tau_values, scan.f_equiv, scan.p_values):
            row = [_fmt(tau), _fmt(f), _fmt(p)]
            if label_column:
                row.append(label)
            writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def write_sidecar(path, params: dict) -> None:
    payload = {"version": __version__, "params": params}
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def to_json(obj, **kwargs) -> str:
    return json.dumps(obj, default=_json_default, **kwargs)
