"""Moments and degenerate limit law of the rn-example factor.

    python3 scripts/rn_example.py --reps 1000000 --n 2 5 50
"""

import argparse
from dataclasses import asdict, dataclass, field

import numpy as np

from mdep.catalog import RN_M2, RN_M4, rn_example
from mdep.clt import normal_distance, rn_example_moments
from mdep.blockfactor import simulate_sums
from mdep.rng import DEFAULT_SEED


@dataclass
class Config:
    reps: int = 10**6
    sum_reps: int = 100_000
    n: list = field(default_factory=lambda: [2, 5, 50])
    seed: int = DEFAULT_SEED
    workers: int = 1


def run(cfg: Config) -> dict:
    mom = rn_example_moments(cfg.reps, cfg.seed, cfg.workers)
    out = {
        "config": asdict(cfg),
        "m2": mom.m2, "m2_se": mom.std_errors[0], "m2_target": RN_M2,
        "m4": mom.m4, "m4_se": mom.std_errors[1], "m4_target": RN_M4,
        # a centred normal would have m4 = 3 m2^2
        "m4_minus_3m2sq": mom.m4 - 3 * mom.m2**2,
        "sums": [],
    }
    bf, src = rn_example()
    for i, n in enumerate(cfg.n):
        s = simulate_sums([bf], src, n, cfg.sum_reps, cfg.seed, cfg.workers, stream=10 + i)[:, 0]
        nd = normal_distance(s, 2.0)
        out["sums"].append({"n": n, "variance": float(np.var(s)), "ks_to_N02": nd.distance,
                            "ks_threshold": nd.threshold, "ks_pass": nd.passed})
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--reps", type=int, default=Config.reps)
    p.add_argument("--sum-reps", type=int, default=Config.sum_reps)
    p.add_argument("--n", type=int, nargs="+", default=[2, 5, 50])
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    a = p.parse_args()
    res = run(Config(a.reps, a.sum_reps, a.n, a.seed, a.workers))
    print(f"E X^2 = {res['m2']:.5f} +- {res['m2_se']:.5f}  (target {RN_M2:.6f})")
    print(f"E X^4 = {res['m4']:.4f} +- {res['m4_se']:.4f}  (target {RN_M4:.6f})")
    print(f"E X^4 - 3 (E X^2)^2 = {res['m4_minus_3m2sq']:.3f}; X itself is not Gaussian")
    for row in res["sums"]:
        print(f"n = {row['n']:>4}: Var S_n = {row['variance']:.4f}, "
              f"KS to N(0,2) = {row['ks_to_N02']:.4f} (threshold {row['ks_threshold']:.4f})")


if __name__ == "__main__":
    main()
