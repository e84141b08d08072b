"""Fringe densities and centred variances for conditioned Galton-Watson trees.

    python3 scripts/gw_densities.py --offspring poisson1 --n 2000 --reps 2000
"""

import argparse
import json
import math
from dataclasses import dataclass

from mdep.gw import gw_alpha_beta, gw_sigma_squared, gw_subtree_counts
from mdep.limits import gw_fringe_density
from mdep.rng import DEFAULT_SEED
from mdep.trees import LinearSubtreeStatistic, OffspringDistribution, all_ordered_trees


@dataclass
class Config:
    offspring: str = "poisson1"
    max_size: int = 3
    n: int = 2000
    reps: int = 2000
    seed: int = DEFAULT_SEED


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--offspring", default="poisson1", help="preset name or JSON {\"p\": [...]}")
    p.add_argument("--max-size", type=int, default=3)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    cfg = Config(**{k.replace("-", "_"): v for k, v in vars(p.parse_args()).items()})

    spec = json.loads(cfg.offspring) if cfg.offspring.lstrip().startswith("{") else cfg.offspring
    off = OffspringDistribution.parse(spec)
    trees = [t for k in range(1, cfg.max_size + 1) for t in all_ordered_trees(k, off.support)]
    print(f"offspring {off.describe()}")
    print(f"{'tree':>10} {'mc':>9} {'se':>9} {'limit':>9} {'alpha':>8} {'beta':>8} {'sigma2':>9}")
    for i, t in enumerate(trees):
        dens = gw_subtree_counts(cfg.n, t, off, cfg.reps, cfg.seed + i) / cfg.n
        mean, se = dens.mean(), dens.std(ddof=1) / math.sqrt(cfg.reps)
        stat = LinearSubtreeStatistic.single(t)
        a, b = gw_alpha_beta(stat, off)
        s2 = gw_sigma_squared(stat, off)
        print(f"{t.code:>10} {mean:9.5f} {se:9.2e} {gw_fringe_density(t, off):9.5f} "
              f"{a:8.4f} {b:8.4f} {s2:9.5f}")


if __name__ == "__main__":
    main()
