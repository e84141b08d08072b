"""Fringe densities of random BSTs for every tree up to a given size.

Monte Carlo mean of n_T / n against the limiting window probability,
plus the smallest eigenvalue of the limiting covariance of the counts.
E n_T / n differs from the limit by O(1/n) (boundary effects), so z
drifts for small n.

    python3 scripts/bst_densities.py --max-size 3 --n 2000 --reps 5000
"""

import argparse
import math
from dataclasses import dataclass

from mdep.blockfactor import SourceDistribution
from mdep.bst import bst_factor, bst_subtree_counts
from mdep.clt import covariance_matrix_mc
from mdep.limits import bst_fringe_density
from mdep.rng import DEFAULT_SEED
from mdep.trees import all_binary_trees


@dataclass
class Config:
    max_size: int = 3
    n: int = 2000
    reps: int = 5000
    seed: int = DEFAULT_SEED
    workers: int = 1


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--max-size", type=int, default=3)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--reps", type=int, default=5000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    cfg = Config(**{k.replace("-", "_"): v for k, v in vars(p.parse_args()).items()})

    trees = [t for k in range(1, cfg.max_size + 1) for t in all_binary_trees(k)]
    print(f"{'tree':>12} {'mc':>10} {'se':>9} {'limit':>10} {'z':>6}")
    for i, t in enumerate(trees):
        dens = bst_subtree_counts(cfg.n, t, cfg.reps, cfg.seed + i, cfg.workers) / cfg.n
        mean, se = dens.mean(), dens.std(ddof=1) / math.sqrt(cfg.reps)
        lim = bst_fringe_density(t)
        print(f"{t.code:>12} {mean:10.6f} {se:9.2e} {lim:10.6f} {(mean - lim) / se:6.2f}")

    est = covariance_matrix_mc([bst_factor(t) for t in trees], SourceDistribution.uniform(), cfg.n,
                               cfg.reps, cfg.seed, labels=[t.code for t in trees], workers=cfg.workers)
    lo, hi = est.min_eigenvalue_ci
    print(f"smallest eigenvalue of n^-1 Cov: {est.min_eigenvalue:.5f} (bootstrap 95% CI {lo:.5f}, {hi:.5f})")


if __name__ == "__main__":
    main()
