"""Parameter recovery error versus sample size for one family.

    python3 scripts/recovery_sweep.py --family power_log_normal --params 0.95 0.74
"""
import argparse
import time

import numpy as np

from tripmine import distributions as dist
from tripmine.errors import FitError
from tripmine.fitting import fit_mle


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", default="power_log_normal")
    ap.add_argument("--params", type=float, nargs="+", default=[0.95, 0.74])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000, 5000, 10_000, 20_000])
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()
    truth = np.array(args.params)

    print(f"{'n':>7} {'median err':>11} {'max err':>9} {'within 5%':>10} {'fails':>6} {'s/fit':>7}")
    for n in args.sizes:
        errs, fails = [], 0
        t0 = time.perf_counter()
        for seed in range(args.seeds):
            x = dist.sample(args.family, truth, seed, n)
            try:
                theta = fit_mle(args.family, x).params
            except FitError:
                fails += 1
                continue
            errs.append(float(np.max(np.abs(theta - truth) / np.abs(truth))))
        per_fit = (time.perf_counter() - t0) / args.seeds
        errs = np.array(errs) if errs else np.array([np.nan])
        print(f"{n:>7} {np.median(errs):>11.4f} {errs.max():>9.4f} {int((errs <= 0.05).sum()):>10} "
              f"{fails:>6} {per_fit:>7.2f}")


if __name__ == "__main__":
    main()
