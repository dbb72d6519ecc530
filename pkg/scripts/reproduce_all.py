"""Run every figure experiment with its defaults and write one run directory each."""
import argparse
import json
import time
from pathlib import Path

from ddshaper.harness import RUNNERS, ExperimentSpec, run_experiment, write_run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("runs"))
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("kinds", nargs="*", default=list(RUNNERS))
    args = ap.parse_args()
    for kind in args.kinds:
        t0 = time.perf_counter()
        result = run_experiment(ExperimentSpec(kind), threads=args.threads)
        out = write_run(result, args.out / kind)
        brief = {k: v for k, v in result.summary.items() if not isinstance(v, (dict, list))}
        print(f"{kind:14s} {time.perf_counter() - t0:6.2f} s  {out}")
        print("   ", json.dumps(brief, default=str))


if __name__ == "__main__":
    main()
