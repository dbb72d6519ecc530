import json

import numpy as np
import pytest

from ddshaper.analytic import AcSignal, SequenceParams, scan_response
from ddshaper.errors import ValidationError
from ddshaper.harness import (
    DEFAULTS,
    ExperimentSpec,
    NoResonanceError,
    find_minima,
    find_resonance,
    run_experiment,
    twotone_default_n,
    write_run,
)
from ddshaper.scan import ScanResult

F_AC = 9.746969e6


def test_unknown_kind_and_key():
    with pytest.raises(ValidationError, match="unknown experiment"):
        ExperimentSpec("fig5")
    with pytest.raises(ValidationError) as err:
        ExperimentSpec("fig3_zoom", {"tau_stepp": 1e-12})
    assert err.value.key == "tau_stepp"


def test_overrides_merge_over_defaults():
    spec = ExperimentSpec("fig3_zoom", {"n_points": 11})
    p = spec.params()
    assert p["n_points"] == 11
    assert p["tau_step"] == DEFAULTS["fig3_zoom"]["tau_step"]


def test_symmetric_dip_exact_center():
    x = np.linspace(0, 1, 401)
    center = x[170]
    scan = ScanResult(x, 1 - 0.8 * np.exp(-(((x - center) / 0.05) ** 2)))
    tau, width = find_resonance(scan)
    assert tau == pytest.approx(center, abs=1e-15)
    assert width == pytest.approx(2 * 0.05 * np.sqrt(np.log(2)), rel=1e-3)


def test_parabolic_dip_off_grid():
    x = np.linspace(0, 1, 21)
    scan = ScanResult(x, 0.2 + 0.5 * (x - 0.4321) ** 2)
    assert find_resonance(scan)[0] == pytest.approx(0.4321, abs=1e-12)


def test_edge_minimum_rejected():
    x = np.linspace(0, 1, 11)
    with pytest.raises(NoResonanceError):
        find_resonance(ScanResult(x, 0.5 + 0.4 * x))


def test_dip_must_be_contained():
    x = np.linspace(0, 1, 11)
    p = np.full(11, 0.9)
    p[:6] = [0.3, 0.3, 0.3, 0.3, 0.3, 0.2]
    with pytest.raises(NoResonanceError):
        find_resonance(ScanResult(x, p))


def test_single_tone_resonance_within_one_step():
    tau0 = 1 / (2 * F_AC)
    step = 3e-12
    scan = scan_response(SequenceParams(192, tau0), tau0 - 200.3 * step, step, 401, [AcSignal(F_AC, 0.3e-6)])
    assert abs(find_resonance(scan)[0] - tau0) < step


def test_find_minima_orders_by_tau():
    x = np.linspace(0, 1, 101)
    p = 1 - 0.5 * np.exp(-((x - 0.3) / 0.02) ** 2) - 0.7 * np.exp(-((x - 0.6) / 0.02) ** 2)
    idx = find_minima(ScanResult(x, p), 2)
    assert [round(x[i], 2) for i in idx] == [0.3, 0.6]


def test_fig2_shaped_default():
    r = run_experiment(ExperimentSpec("fig2_shaped"))
    s = r.summary
    # the tau factor in the phase tilts the dip slightly towards longer tau
    assert abs(s["tau_min_s"] - 51.298e-9) < 0.05e-9
    assert s["tau_step_s"] < 2e-9 / 10
    assert s["waveform_center_residual_s"] < 5e-12


def test_fig2_square_on_sample_grid():
    r = run_experiment(ExperimentSpec("fig2_square"))
    tau = r.scans["scan"].tau_values
    assert np.allclose(np.diff(tau), 2e-9)
    assert np.allclose(tau / 2e-9, np.round(tau / 2e-9))
    assert r.summary["frequency_step_hz"] == pytest.approx(380013.6, abs=0.1)


def test_fig3_zoom_frequency_step():
    r = run_experiment(ExperimentSpec("fig3_zoom"))
    assert abs(r.summary["frequency_step_hz"] - 114) < 1


def test_fig4_twotone_default_resolved():
    r = run_experiment(ExperimentSpec("fig4_twotone"))
    s = r.summary
    assert s["n_pulses"] == twotone_default_n(1 / (2 * F_AC)) == 19494
    assert s["resolved"] is True
    assert s["separation_s"] == pytest.approx(s["expected_separation_s"], rel=0.02)


def test_twotone_unresolved_with_short_sequence():
    r = run_experiment(ExperimentSpec("fig4_twotone", {"n_pulses": 2000, "tau_step": 1e-12}))
    assert r.summary["resolved"] is False


def test_fig4_c13_dip_near_prediction():
    r = run_experiment(ExperimentSpec("fig4_c13", {"n_points": 41}))
    assert abs(r.summary["f_equiv_min_hz"] - r.summary["predicted_f_hz"]) < 10e3


def test_runs_are_bitwise_deterministic(tmp_path):
    for kind, ov in [("fig3_scaling", {"n_points": 301}), ("figS1_shapes", {"n_points": 5})]:
        a = write_run(run_experiment(ExperimentSpec(kind, ov)), tmp_path / "a")
        b = write_run(run_experiment(ExperimentSpec(kind, ov), threads=2), tmp_path / "b")
        for name in ("scan.csv", "summary.json", "params.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


def test_write_run_outputs(tmp_path):
    out = write_run(run_experiment(ExperimentSpec("figS1_shapes", {"n_points": 5})), tmp_path)
    lines = (out / "scan.csv").read_text().splitlines()
    assert lines[0] == "tau_s,f_equiv_hz,p,shape"
    assert len(lines) == 1 + 4 * 5
    assert (out / "diffs.csv").read_text().startswith("tau_s,dp_square,dp_cosine,dp_cosine14")
    params = json.loads((out / "params.json").read_text())
    assert params["kind"] == "figS1_shapes"
    assert params["params"]["n_points"] == 5
    summary = json.loads((out / "summary.json").read_text())
    assert "max_abs_cosine14_vs_cosine" in summary
