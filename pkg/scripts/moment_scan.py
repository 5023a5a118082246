"""Tabulate estimator second moments and the sphere infinity-norm moment across dimensions."""

import argparse
import sys
from dataclasses import dataclass

import numpy as np

from twopoint.diagnostics import infinity_norm_moment, second_moment_scan


@dataclass(frozen=True)
class MomentConfig:
    max_power: int = 9
    samples: int = 100_000
    seed: int = 0


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--max-power", type=int, default=MomentConfig.max_power, help="largest d is 2**max_power")
    p.add_argument("--samples", type=int, default=MomentConfig.samples)
    p.add_argument("--seed", type=int, default=MomentConfig.seed)
    a = p.parse_args(argv)
    cfg = MomentConfig(a.max_power, a.samples, a.seed)
    rng = np.random.default_rng(cfg.seed)
    dims = tuple(2**k for k in range(1, cfg.max_power + 1))

    sym = second_moment_scan("symmetric", "l2norm", "random_ball", dims, cfg.samples, rng)
    anc = second_moment_scan("anchored", "l2norm", "origin", dims, min(cfg.samples, 10_000), rng)
    print(f"{'d':>6} {'sym E|g|^2':>12} {'/d':>7} {'anchored':>12} {'/d^2':>6} {'inf-norm p':>11} {'/sqrt(log d/d)':>15}")
    for i, d in enumerate(dims):
        r, _ = infinity_norm_moment(d, max(10_000, min(cfg.samples, 20_000_000 // d)), rng)
        print(f"{d:>6} {sym.estimates[i]:>12.5g} {sym.estimates[i] / d:>7.4f} {anc.estimates[i]:>12.6g} "
              f"{anc.estimates[i] / d**2:>6.3f} {r:>11.5f} {r / np.sqrt(np.log(d) / d):>15.4f}")
    print(f"symmetric log-log slope {sym.fitted_log_slope:.4f}, anchored slope {anc.fitted_log_slope:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
