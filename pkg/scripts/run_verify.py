"""Synthesize the default population, run every stage, and print recovery rates.

    python3 scripts/run_verify.py --seed 7 --out runs/verify
"""
import argparse
import json
import time

from tripmine.pipeline import ArtifactWriter
from tripmine.synth import SynthSpec
from tripmine.verify import run_verify


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--users", type=int, default=500)
    ap.add_argument("--out", default="runs/verify")
    args = ap.parse_args()

    t0 = time.perf_counter()
    report = run_verify(SynthSpec(seed=args.seed, n_users=args.users), args.out, ArtifactWriter())
    print(json.dumps(report["rates"], indent=1))
    for row in report["fit_recovery"]:
        print(f"{row['class']:>14} {row['quantity']:<8} {row['family']:<17} rank {row['rank']}  "
              f"max rel err {row['max_rel_error']:.4f}")
    for name, ok in report["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"{time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
