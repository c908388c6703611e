"""Adaptive fine step size against dimension on a standard normal.

Runs short adaptive chains (h=1/2, M=10, a_min=0.7) from the mode and from
stationarity and fits log-log slopes; theory predicts about -1/2 and -1/4.

    python scripts/step_size_scaling.py --chains 200 --out runs/scaling
    python scripts/step_size_scaling.py --burnin   # also run the 50-step burn-in regime
"""

import argparse

from gistnuts.cli import ScalingConfig, cmd_scaling


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--dims", type=int, nargs="+", default=[64, 128, 256, 512, 1024, 2048, 4096])
    p.add_argument("--chains", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burnin", action="store_true")
    p.add_argument("--out", default="runs/scaling")
    args = p.parse_args()
    regimes = ("mode", "stationary", "burnin") if args.burnin else ("mode", "stationary")
    cfg = ScalingConfig(dims=tuple(args.dims), chains=args.chains, seed=args.seed, regimes=regimes, out=args.out)
    rows, fits = cmd_scaling(cfg)
    print(f"{'d':>6} {'regime':>10} {'mean_step':>10} {'h*2^-mean_k':>12}")
    for r in rows:
        print(f"{r['d']:>6} {r['regime']:>10} {r['mean_step']:>10.4f} {r['step_of_mean_k']:>12.4f}")
    for column, per_regime in fits.items():
        for regime, fit in per_regime.items():
            print(f"slope[{column}, {regime}] = {fit['slope']:+.3f}")


if __name__ == "__main__":
    main()
