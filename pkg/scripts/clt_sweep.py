"""CLT diagnostics across n for a factor file or catalog entry.

    python3 scripts/clt_sweep.py data/product_bernoulli.json --n 5 50 500 --reps 20000
"""

import argparse
import sys
from dataclasses import dataclass, field

from mdep.blockfactor import load_factor_spec
from mdep.catalog import build
from mdep.clt import simulate_clt
from mdep.rng import DEFAULT_SEED
from mdep.variance import exact_moments


@dataclass
class Config:
    factor: str
    n: list = field(default_factory=lambda: [10, 100, 1000])
    reps: int = 20_000
    seed: int = DEFAULT_SEED
    workers: int = 1


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("factor", help="factor JSON file or catalog name")
    p.add_argument("--n", type=int, nargs="+", default=[10, 100, 1000])
    p.add_argument("--reps", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    a = p.parse_args()
    cfg = Config(a.factor, a.n, a.reps, a.seed, a.workers)
    if cfg.factor.endswith(".json"):
        bf, src = load_factor_spec(cfg.factor)
    else:
        bf, src = build(cfg.factor)
    if bf.is_table:
        print(f"exact sigma^2 = {float(exact_moments(bf, src).sigma2):.6f}", file=sys.stderr)
    rep = simulate_clt(bf, src, cfg.n, cfg.reps, cfg.seed, workers=cfg.workers)
    sys.stdout.write(rep.to_csv())


if __name__ == "__main__":
    main()
