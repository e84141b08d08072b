import sys
from fractions import Fraction
from itertools import product
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from mdep.blockfactor import BlockFactor, SourceDistribution  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "data"


@pytest.fixture
def bern():
    return SourceDistribution.bernoulli()


@pytest.fixture
def product_factor():
    return BlockFactor.from_table((0, 1), 2, [0, 0, 0, 1], name="x1*x2")


@pytest.fixture
def difference_factor():
    return BlockFactor.from_table((0, 1), 2, [0, 1, -1, 0], name="x2-x1")


def random_probs(rng, k):
    """Rational probabilities with small denominators."""
    w = rng.integers(1, 5, size=k)
    return [Fraction(int(x), int(w.sum())) for x in w]


def random_factor(rng, max_k=3, max_ell=3, lo=-3, hi=3, planted=0.5):
    """Integer table factor; with probability ``planted`` a coboundary plus constant,
    sometimes perturbed in one entry."""
    k = int(rng.integers(1, max_k + 1))
    ell = int(rng.integers(1, max_ell + 1))
    probs = random_probs(rng, k)
    src = SourceDistribution.finite(tuple(range(k)), probs)
    if rng.random() < planted:
        g = {w: int(rng.integers(-1, 2)) for w in product(range(k), repeat=ell - 1)}
        mu = int(rng.integers(-1, 2))
        table = [g[w[1:]] - g[w[:-1]] + mu for w in product(range(k), repeat=ell)]
        if rng.random() < 0.3:
            table[int(rng.integers(len(table)))] += int(rng.choice([-1, 1]))
        table = [min(hi, max(lo, t)) for t in table]
    else:
        table = [int(x) for x in rng.integers(lo, hi + 1, size=k**ell)]
    return BlockFactor.from_table(tuple(range(k)), ell, table), src


@st.composite
def small_factors(draw, max_k=3, max_ell=3):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_factor(np.random.default_rng(seed), max_k, max_ell)


def as_function(bf):
    """Plain-Python view of a table factor for the brute-force oracles."""
    return lambda *w: bf.table[tuple(w)]


ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split(".")[0].split()[-1])):
            terminalreporter.write_line(line)
