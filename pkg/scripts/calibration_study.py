"""Repeat the synthetic calibration study over many seeds.

    python3 scripts/calibration_study.py [--seeds 20] [--bootstrap 0] [--jobs 1]

For each seed: draw 100 records from the study truth, fit, and report the
largest relative error of the fitted median E-N curve over the data range.
With ``--bootstrap B`` also report the share of grid points where the
92.5% percentile band encloses the true median curve.
"""
import argparse
import time
import warnings

import numpy as np

from lcfrisk import calibration as cal
from lcfrisk import fixtures as fx


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--first", type=int, default=0)
    ap.add_argument("--bootstrap", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    warnings.simplefilter("ignore", cal.IdentifiabilityWarning)

    truth, profiles, grids = fx.study_material(), fx.study_profiles(), fx.study_grids()
    true = {p: cal.en_curve(truth, profiles[p], 0.5, g, fx.STUDY_T) for p, g in grids.items()}
    errors, coverage = [], []
    for seed in range(args.first, args.first + args.seeds):
        ds = cal.synthetic_dataset(truth, profiles, fx.study_design(), seed=seed)
        t0 = time.perf_counter()
        res = cal.fit(ds, profiles, fx.STUDY_THETA0, truth)
        fitted = cal.median_curves(res.theta, truth, profiles, grids, fx.STUDY_T)
        err = {p: float(np.max(np.abs(fitted[p] / true[p] - 1))) for p in grids}
        errors.append(max(err.values()))
        line = f"seed {seed:3d}  " + "  ".join(f"{p} {e:.3f}" for p, e in err.items())
        line += f"  nll {res.nll:.2f} vs truth {cal.Likelihood(ds, profiles, truth)(truth.theta):.2f}"
        if args.bootstrap:
            bands = cal.bootstrap(ds, profiles, res, truth, B=args.bootstrap, seed=seed, grids=grids,
                                  n_jobs=args.jobs)
            inside = [np.mean((bands.lower[p] <= true[p]) & (true[p] <= bands.upper[p])) for p in grids]
            coverage.append(float(np.mean(inside)))
            line += f"  coverage {coverage[-1]:.2f}"
        print(line + f"  ({time.perf_counter() - t0:.1f}s)")

    errors = np.array(errors)
    print(f"max median error: mean {errors.mean():.3f}, median {np.median(errors):.3f}, "
          f"share <= 0.10 {np.mean(errors <= 0.10):.2f}")
    if coverage:
        print(f"band coverage: mean {np.mean(coverage):.3f}, min {np.min(coverage):.3f}")


if __name__ == "__main__":
    main()
