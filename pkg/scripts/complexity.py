"""Wall-time growth of training (in n) and prediction (in m) for a 10-round ensemble.

Each size is timed as the best of several interleaved repetitions; training
times are pooled over ten seeded datasets per size.

    python scripts/complexity.py
"""

import argparse
import time

import numpy as np

from kpboost.boosting import BoostParams, fit, predict
from kpboost.dataio import two_gaussians


def best_times(jobs, reps):
    best = [np.inf] * len(jobs)
    for _ in range(reps):
        for i, job in enumerate(jobs):
            t = time.perf_counter()
            job()
            best[i] = min(best[i], time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--train-sizes", type=int, nargs="+", default=[200, 400, 800])
    ap.add_argument("--test-sizes", type=int, nargs="+", default=[4000, 8000, 16000])
    ap.add_argument("--reps", type=int, default=7)
    args = ap.parse_args()

    params = BoostParams(rounds=10, step=0.01, sigma=1.0, C=100.0)
    fit(two_gaussians(60, seed=0), params)  # compile the solver

    sets = [[two_gaussians(n, seed=s) for s in range(10)] for n in args.train_sizes]
    train_t = best_times([lambda d=d: [fit(ds, params) for ds in d] for d in sets], args.reps)
    print("training")
    for i, (n, t) in enumerate(zip(args.train_sizes, train_t)):
        ratio = f"  x{t / train_t[i - 1]:.2f}" if i else ""
        print(f"  n={n:6d}  {t:8.3f}s{ratio}")

    tr = two_gaussians(args.train_sizes[-1], seed=1)
    ens = fit(tr, params)
    tests = [two_gaussians(m, seed=2) for m in args.test_sizes]
    pred_t = best_times([lambda te=te: predict(ens, tr, te) for te in tests], args.reps)
    print(f"prediction (n={tr.n})")
    for i, (m, t) in enumerate(zip(args.test_sizes, pred_t)):
        ratio = f"  x{t / pred_t[i - 1]:.2f}" if i else ""
        print(f"  m={m:6d}  {t:8.4f}s{ratio}")


if __name__ == "__main__":
    main()
