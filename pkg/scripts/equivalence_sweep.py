"""Random sweep: coboundary verdict against exact sigma^2 = 0.

    python3 scripts/equivalence_sweep.py --count 2000 --max-alphabet 3 --max-ell 3
"""

import argparse
import sys
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from conftest import random_factor  # noqa: E402
from mdep.rng import DEFAULT_SEED  # noqa: E402
from mdep.variance import coboundary_decompose, exact_moments, walk_sum  # noqa: E402


@dataclass
class Config:
    count: int = 2000
    max_alphabet: int = 3
    max_ell: int = 3
    seed: int = DEFAULT_SEED


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--count", type=int, default=2000)
    p.add_argument("--max-alphabet", type=int, default=3)
    p.add_argument("--max-ell", type=int, default=3)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    cfg = Config(**{k.replace("-", "_"): v for k, v in vars(p.parse_args()).items()})

    rng = np.random.default_rng(cfg.seed)
    tally = {"degenerate": 0, "nondegenerate": 0, "disagree": 0, "bad_potential": 0, "bad_witness": 0}
    for _ in range(cfg.count):
        bf, src = random_factor(rng, cfg.max_alphabet, cfg.max_ell)
        res = coboundary_decompose(bf, src)
        tally[res.verdict] += 1
        tally["disagree"] += res.degenerate != (exact_moments(bf, src).sigma2 == 0)
        if res.degenerate:
            tally["bad_potential"] += any(
                bf.table[tuple(w)] != res.g[w[1:]] - res.g[w[:-1]] + res.mu
                for w in product(src.values, repeat=bf.ell))
        else:
            tally["bad_witness"] += walk_sum(bf, res.witness, res.mu) in (0, Fraction(0))
    for k, v in tally.items():
        print(f"{k:>14}: {v}")
    return 1 if tally["disagree"] or tally["bad_potential"] or tally["bad_witness"] else 0


if __name__ == "__main__":
    sys.exit(main())
