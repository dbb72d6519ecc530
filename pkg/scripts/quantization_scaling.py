"""Largest |p(quantized) - p(exact)| over the S1 window versus DAC resolution."""
import argparse
from dataclasses import replace

import numpy as np

from ddshaper.harness import DEFAULTS
from ddshaper.spinsim import DriveParams, fig4b_bath, scan_sequence


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--detuning-mhz", type=float, default=0.0)
    ap.add_argument("--bits", type=int, nargs="*", default=[10, 12, 14, 16])
    args = ap.parse_args()
    p = DEFAULTS["figS1_shapes"]
    taus = 1 / (2 * np.linspace(p["f_start"], p["f_stop"], p["n_points"]))
    drive = DriveParams.pi_pulse(p["t_pi"], detuning=2 * np.pi * args.detuning_mhz * 1e6)
    exact = scan_sequence(p["n_pulses"], taus, drive, fig4b_bath()).p_values
    for bits in args.bits:
        q = scan_sequence(p["n_pulses"], taus, replace(drive, vertical_bits=bits), fig4b_bath()).p_values
        i = int(np.argmax(np.abs(q - exact)))
        print(f"{bits:3d} bits: max |dp| = {abs(q[i] - exact[i]):.3e} at f = {1 / (2 * taus[i]) / 1e6:.4f} MHz")


if __name__ == "__main__":
    main()
