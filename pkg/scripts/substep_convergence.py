"""Change in p over the S1 window as the pulse integration grid is refined."""
import argparse

import numpy as np

from ddshaper.harness import DEFAULTS
from ddshaper.spinsim import DriveParams, compare_pulse_shapes, fig4b_bath


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--detuning-mhz", type=float, default=0.0)
    args = ap.parse_args()
    p = DEFAULTS["figS1_shapes"]
    taus = 1 / (2 * np.linspace(p["f_start"], p["f_stop"], p["n_points"]))
    det = 2 * np.pi * args.detuning_mhz * 1e6
    prev = None
    for sub in (1, 2, 4, 8, 16):
        drive = DriveParams.pi_pulse(p["t_pi"], substeps_per_sample=sub, detuning=det)
        scans, _ = compare_pulse_shapes(p["n_pulses"], taus, drive, fig4b_bath(),
                                        shapes=("square", "cosine", "cosine14"))
        if prev is not None:
            dp = max(np.max(np.abs(scans[k].p_values - prev[k].p_values)) for k in scans)
            print(f"substeps {sub // 2:2d} -> {sub:2d}: max |dp| = {dp:.3e}")
        prev = scans


if __name__ == "__main__":
    main()
