"""Fixed-step NUTS on the 10-d funnel (h=1/4, M=10).

Writes the usual sample outputs and prints how much mass the chain finds
below omega = -4 against the exact value.

    python scripts/funnel_fixed.py --draws 50000 --out runs/funnel_fixed
"""

import argparse
import json
from dataclasses import replace

import numpy as np
from scipy import stats

from gistnuts.cli import PRESETS, ChainConfig, cmd_sample, read_draws


def omega_report(omega: np.ndarray) -> dict:
    edges = np.arange(-10.0, 10.5, 0.5)
    counts, _ = np.histogram(omega, bins=edges)
    return {
        "mean": float(omega.mean()),
        "sd": float(omega.std()),
        "frac_below_-4": float(np.mean(omega < -4)),
        "exact_frac_below_-4": float(stats.norm.cdf(-4 / 3)),
        "hist_edges": edges.tolist(),
        "hist_density": (counts / (omega.size * 0.5)).tolist(),
    }


def main(preset="funnel-fixed", default_out="runs/funnel_fixed"):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--draws", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=default_out)
    args = p.parse_args()
    cfg = replace(ChainConfig(**PRESETS[preset]), draws=args.draws, seed=args.seed, out=args.out)
    summary = cmd_sample(cfg)
    _, draws = read_draws(f"{args.out}/draws.csv")
    report = omega_report(draws[:, 0])
    with open(f"{args.out}/omega.json", "w") as fh:
        json.dump(report, fh, indent=2)
    print(f"acceptance {summary['acceptance_rate']:.3f}  mean k {summary['mean_k_used']:.2f}  "
          f"wall {summary['wall_time_s']:.1f}s")
    print(f"omega mean {report['mean']:+.3f} sd {report['sd']:.3f}  "
          f"P(omega<-4) {report['frac_below_-4']:.4f} (exact {report['exact_frac_below_-4']:.4f})")


if __name__ == "__main__":
    main()
