"""Print the kappa-delta curve of a CSV dataset and mark its knee.

The data are z-scored over all rows first, as the CLI ``disjuncts`` command does.

    python scripts/kappa_delta.py data/iris12vs3.csv
    python scripts/kappa_delta.py data/balance.csv --traversal symmetric --neighbors global
"""

import argparse

from kpboost.dataio import load_csv, normalize_whole
from kpboost.disjuncts import NEIGHBOR_MODES, TRAVERSALS, kappa_delta_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("data")
    ap.add_argument("--neighbors", default="within", choices=NEIGHBOR_MODES)
    ap.add_argument("--traversal", default="directed", choices=TRAVERSALS)
    args = ap.parse_args()

    ds = normalize_whole(load_csv(args.data))
    curve = kappa_delta_curve(ds, args.neighbors, args.traversal)
    for k, d in curve.points:
        print(f"{k:3d} {d:5d}{'  <- knee' if k == curve.knee else ''}")
    print(f"per-class disjuncts at the knee: {curve.knee_partition.deltas}")


if __name__ == "__main__":
    main()
