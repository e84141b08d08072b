from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import as_function, random_factor, small_factors
from oracles import brute_cov, brute_sigma2, brute_var_Sn
from mdep.blockfactor import BlockFactor, SourceDistribution, evaluate_window, sample_path
from mdep.catalog import uniform_difference
from mdep.errors import ArityError, ResourceError, UnsupportedError
from mdep.variance import (cesaro_coboundary_estimate, coboundary_decompose, exact_moments,
                           is_closed_walk, jackknife_variance, rc2_witness_check, sigma_squared_mc,
                           var_Sn_exact, walk_sum)


def oracle_args(bf, src):
    return as_function(bf), src.values, src.probs, bf.ell


# frozen from the enumeration oracles in tests/oracles.py
def test_product_factor_moments(product_factor, bern):
    ms = exact_moments(product_factor, bern)
    assert ms.exact
    assert ms.mean == Fraction(1, 4)
    assert ms.variance == Fraction(3, 16)
    assert ms.covariances == (Fraction(1, 16),)
    assert ms.sigma2 == Fraction(5, 16)
    assert var_Sn_exact(product_factor, bern, 3) == Fraction(13, 16)


def test_difference_factor_var(difference_factor, bern):
    assert exact_moments(difference_factor, bern).sigma2 == 0
    assert var_Sn_exact(difference_factor, bern, 7) == Fraction(1, 2)


def test_float_mode_matches_exact(product_factor, bern):
    ms = exact_moments(product_factor, bern, exact=False)
    assert isinstance(ms.sigma2, float)
    assert ms.sigma2 == pytest.approx(5 / 16, abs=1e-12)


def test_budget_guard(bern):
    bf = BlockFactor.from_table((0, 1), 12, [0] * 2**12)
    with pytest.raises(ResourceError):
        exact_moments(bf, bern, budget=1000)


def test_unsupported_for_continuous_source():
    bf, src = uniform_difference()
    with pytest.raises(UnsupportedError):
        exact_moments(bf, src)


def test_jackknife_matches_direct_leave_one_out():
    x = np.random.default_rng(0).normal(size=40)
    loo = np.array([np.var(np.delete(x, i), ddof=1) for i in range(40)])
    se = np.sqrt(39 / 40 * ((loo - loo.mean()) ** 2).sum())
    est = jackknife_variance(x)
    assert est.estimate == pytest.approx(np.var(x, ddof=1))
    assert est.std_error == pytest.approx(se)


@settings(max_examples=60, deadline=None)
@given(small_factors())
def test_moments_match_oracle(pair):
    bf, src = pair
    ms = exact_moments(bf, src)
    args = oracle_args(bf, src)
    assert ms.variance == brute_cov(*args, 0)
    assert ms.covariances == tuple(brute_cov(*args, k) for k in range(1, bf.ell))
    assert ms.sigma2 == brute_sigma2(*args)


@settings(max_examples=40, deadline=None)
@given(small_factors(max_k=3, max_ell=2), st.integers(1, 5))
def test_var_Sn_matches_path_enumeration(pair, n):
    bf, src = pair
    assert var_Sn_exact(bf, src, n) == brute_var_Sn(*oracle_args(bf, src), n)


@settings(max_examples=100, deadline=None)
@given(small_factors())
def test_sigma2_nonnegative(pair):
    bf, src = pair
    ms = exact_moments(bf, src)
    assert ms.sigma2 >= 0
    for n in range(1, 8):
        assert var_Sn_exact(bf, src, n) >= 0


@settings(max_examples=150, deadline=None)
@given(small_factors())
def test_degenerate_iff_sigma2_zero(pair):
    bf, src = pair
    res = coboundary_decompose(bf, src)
    assert res.degenerate == (exact_moments(bf, src).sigma2 == 0)


@settings(max_examples=100, deadline=None)
@given(small_factors())
def test_potential_solves_every_window(pair):
    bf, src = pair
    res = coboundary_decompose(bf, src)
    assume(res.degenerate)
    for w in product(src.values, repeat=bf.ell):
        assert evaluate_window(bf, w) == res.g[w[1:]] - res.g[w[:-1]] + res.mu


@settings(max_examples=50, deadline=None)
@given(small_factors(), st.integers(1, 30), st.integers(0, 10**6))
def test_potential_telescopes_on_paths(pair, n, seed):
    bf, src = pair
    res = coboundary_decompose(bf, src)
    assume(res.degenerate)
    p = sample_path(bf, src, n, seed)
    d = list(p.draws)
    m = bf.ell - 1
    first, last = tuple(d[:m]), tuple(d[n:n + m])
    assert p.total == pytest.approx(float(res.g[last] - res.g[first] + n * res.mu))


@settings(max_examples=100, deadline=None)
@given(small_factors())
def test_witness_is_nonzero_closed_walk(pair):
    bf, src = pair
    res = coboundary_decompose(bf, src)
    assume(not res.degenerate)
    assert is_closed_walk(res.witness)
    assert walk_sum(bf, res.witness, res.mu) == res.witness_sum != 0


@settings(max_examples=60, deadline=None)
@given(small_factors(), st.randoms(use_true_random=False))
def test_gauge_freedom(pair, rnd):
    bf, src = pair
    a = coboundary_decompose(bf, src)
    assume(a.degenerate)
    order = list(range(src.size ** (bf.ell - 1)))
    rnd.shuffle(order)
    b = coboundary_decompose(bf, src, order=order)
    assert b.degenerate and a.components == b.components == 1
    shifts = {b.g[w] - a.g[w] for w in a.g}
    assert len(shifts) == 1


@settings(max_examples=60, deadline=None)
@given(small_factors())
def test_float_mode_verdict_agrees(pair):
    bf, src = pair
    fbf = BlockFactor.from_table(bf.alphabet, bf.ell, bf.float_table().ravel())
    fsrc = SourceDistribution.finite(src.values, [float(p) for p in src.probs])
    assert coboundary_decompose(fbf, fsrc).degenerate == coboundary_decompose(bf, src).degenerate


def test_decompose_examples(product_factor, difference_factor, bern):
    res = coboundary_decompose(difference_factor, bern)
    assert res.degenerate and res.mu == 0
    assert res.g[(1,)] - res.g[(0,)] == 1
    res = coboundary_decompose(product_factor, bern)
    assert not res.degenerate and res.witness_sum != 0
    sq = BlockFactor.tabulate(lambda a, b: b * b - a * a + 3, (0, 1, 2), 2)
    res = coboundary_decompose(sq, SourceDistribution.uniform_on((0, 1, 2)))
    assert res.degenerate and res.mu == 3
    assert [res.g[(x,)] - res.g[(0,)] for x in (0, 1, 2)] == [0, 1, 4]


def test_ell_one_constant_factor():
    src = SourceDistribution.finite((0, 1), (Fraction(1, 3), Fraction(2, 3)))
    res = coboundary_decompose(BlockFactor.from_table((0, 1), 1, [5, 5]), src)
    assert res.degenerate and res.mu == 5
    res = coboundary_decompose(BlockFactor.from_table((0, 1), 1, [0, 1]), src)
    assert not res.degenerate and res.witness_sum != 0


def test_equivalence_sweep_hits_both_verdicts():
    rng = np.random.default_rng(5)
    verdicts = [coboundary_decompose(*random_factor(rng)).degenerate for _ in range(200)]
    assert 20 < sum(verdicts) < 180


def test_rc2_check_product(product_factor):
    chk = rc2_witness_check(product_factor, [1], [1], [0, 0, 0, 0], [1, 1, 1, 1])
    assert chk.differs and chk.s_a == 0 and chk.s_b == 5


def test_rc2_check_degenerate_never_differs(difference_factor):
    rng = np.random.default_rng(1)
    for _ in range(50):
        a, b = rng.integers(0, 2, size=(2, 6))
        assert not rc2_witness_check(difference_factor, [0], [1], list(a), list(b)).differs


def test_rc2_arity_and_support(product_factor):
    with pytest.raises(ArityError):
        rc2_witness_check(product_factor, [1, 1], [1], [0], [1])
    bf = BlockFactor.from_function(lambda w: w[..., 0], 2)
    with pytest.raises(UnsupportedError):
        rc2_witness_check(bf, [0.1], [0.2], [0.3], [0.4])


def test_sigma2_mc(product_factor, bern):
    est = sigma_squared_mc(product_factor, bern, 1000, 10_000, seed=3)
    assert abs(est.estimate - 5 / 16) < 5 * est.std_error


def test_cesaro_difference(difference_factor, bern):
    est = cesaro_coboundary_estimate(difference_factor, bern, (1,), 200, 4000, seed=4)
    assert abs(est.estimate - 0.5) < 5 * est.std_error + 2 / 200


def test_cesaro_squares():
    sq = BlockFactor.tabulate(lambda a, b: b * b - a * a + 3, (0, 1, 2), 2)
    src = SourceDistribution.uniform_on((0, 1, 2))
    est = cesaro_coboundary_estimate(sq, src, (2,), 200, 4000, seed=5)
    assert abs(est.estimate - 7 / 3) < 5 * est.std_error + 2 * 4 / 200


def test_cesaro_continuous_source():
    # g(u) = u, so the target is u - 1/2
    bf, src = uniform_difference()
    est = cesaro_coboundary_estimate(bf, src, (0.8,), 200, 4000, seed=6)
    assert abs(est.estimate - 0.3) < 5 * est.std_error + 2 / 200
