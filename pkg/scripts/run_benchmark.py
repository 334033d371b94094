#!/usr/bin/env python3
"""Synthesis solve time versus state dimension, written as CSV."""
import argparse
from pathlib import Path

from covctl.benchmark import run_benchmark, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[3, 5, 10, 15, 20])
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--method", choices=("exact", "sdp"), default="sdp")
    ap.add_argument("--feasibility-only", action="store_true")
    ap.add_argument("--out", default="results/benchmark.csv")
    args = ap.parse_args()

    def show(c):
        print(f"n={c.n:3d}  median {c.median_ms:8.2f} ms  p95 {c.p95_ms:8.2f} ms  "
              f"alpha {c.alpha_median:.4f}", flush=True)

    cases = run_benchmark(args.n, args.reps, args.seed, args.method,
                          args.feasibility_only, progress=show)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(cases, out)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
