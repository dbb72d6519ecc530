"""Dip width ratio N=672 / N=192 as a function of the AC amplitude.

The 1/N scaling of the width holds while the peak Bessel argument stays well
below the first zero of J0 (2.405); at 0.84 uT the N=672 dip is past it.
"""
import numpy as np

from ddshaper.analytic import GAMMA_NV
from ddshaper.harness import ExperimentSpec, run_experiment


def main():
    tau0 = 1 / (2 * 9.746969e6)
    print("   B (uT)   arg(N=672)   ratio    expected   deviation")
    for b in (0.05, 0.1, 0.2, 0.4, 0.6, 0.84, 1.0):
        r = run_experiment(ExperimentSpec("fig3_scaling", {"b_ac": b * 1e-6, "n_list": [192, 672]}))
        lr = r.summary["linewidth_ratio"]
        arg = 2 / np.pi * GAMMA_NV * b * 1e-6 * 672 * tau0
        print(f"{b:9.2f} {arg:12.3f} {lr['measured']:9.4f} {lr['expected']:9.4f} {lr['relative_error']:10.1%}")


if __name__ == "__main__":
    main()
