#!/usr/bin/env python3
"""2-D linear regression heatmaps: stationary SGD clouds across step sizes.

Unregularized least squares on n=5 random points, b=1.  Writes a 512x512
log-density PGM and a box-counting dimension estimate per eta; the support
thins out (dimension drops) as the step size grows.
"""

import argparse

from ifslab.experiments import run_linreg2d


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/linreg2d")
    ap.add_argument("--etas", type=float, nargs="+", default=[0.3, 0.5, 0.7, 0.9])
    ap.add_argument("--n-samples", type=int, default=400_000)
    ap.add_argument("--burn-in", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    records = run_linreg2d(args.etas, args.seed, args.out, args.n_samples, args.burn_in)
    for rec in records:
        if rec.error:
            print(f"eta={rec.eta:.6g}: error: {rec.error}")
        else:
            print(f"eta={rec.eta:.6g}: dimension={rec.dimension.value:.4f}")
    print(f"artifacts in {args.out}")


if __name__ == "__main__":
    main()
