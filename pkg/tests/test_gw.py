import math
from collections import Counter
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from oracles import gw_conditional_law, is_tree_seq, rotated_conditional_law
from mdep.errors import ArityError, DomainError, SpecFileError, UnsupportedError
from mdep.gw import (cyclic_counts, gw_alpha_beta, gw_centered_factor, gw_centering_cov_mc,
                     gw_conditioned_batch, gw_conditioned_degrees, gw_degeneracy_argument,
                     gw_degree_indicator, gw_offspring_source, gw_sigma_squared, gw_subtree_count,
                     gw_subtree_counts, rotate_to_tree, valid_rotations)
from mdep.limits import gw_fringe_density
from mdep.trees import (LinearSubtreeStatistic, OffspringDistribution, OrderedTree,
                        all_ordered_trees, is_tree_sequence)
from mdep.variance import exact_moments

BINARY = OffspringDistribution.from_probs([0.25, 0.5, 0.25])
LEAF = OrderedTree.leaf()
LEAF_STAT = LinearSubtreeStatistic.single(LEAF)


def chi_square_vs_law(seqs, law):
    obs = Counter(map(tuple, seqs))
    assert set(obs) <= set(law)
    keys = sorted(law)
    if len(keys) == 1:
        return 0.0, 0.0
    f_obs = np.array([obs.get(k, 0) for k in keys], dtype=float)
    f_exp = np.array([law[k] for k in keys]) * len(seqs)
    stat = stats.chisquare(f_obs, f_exp).statistic
    return stat, stats.chi2.ppf(0.999, len(keys) - 1)


def oracle_fringe_count(degrees, pattern):
    """Parse the degree sequence into subtrees and compare each subtree's sequence."""
    count = 0

    def parse(i):
        nonlocal count
        j = i + 1
        for _ in range(degrees[i]):
            j = parse(j)
        count += tuple(degrees[i:j]) == tuple(pattern)
        return j

    assert parse(0) == len(degrees)
    return count


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=9))
def test_tree_sequence_matches_oracle(d):
    assert is_tree_sequence(d) == is_tree_seq(d)


def test_ordered_tree_counts():
    # ordered trees with k nodes are counted by Catalan(k - 1)
    assert [len(all_ordered_trees(k)) for k in range(1, 7)] == [1, 1, 2, 5, 14, 42]
    with pytest.raises(DomainError):
        OrderedTree((1, 1))
    assert OrderedTree.parse("2,0,0").degrees == (2, 0, 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.integers(0, n - 1), min_size=n - 1, max_size=n - 1))))
def test_cycle_lemma_unique_rotation(balls):
    # n - 1 balls in n bins: every sequence summing to n - 1
    n, bins = balls
    seq = [bins.count(i) for i in range(n)]
    assert valid_rotations(seq) == 1
    out = rotate_to_tree(np.array([seq]))[0]
    assert is_tree_seq(list(out))
    assert sorted(out) == sorted(seq)


def test_rotation_then_enumeration_agree():
    # the rotated law equals weighting tree sequences by prod p_d
    for n in (3, 4, 5):
        a, b = rotated_conditional_law(list(BINARY.probs), n), gw_conditional_law(list(BINARY.probs), n)
        assert a.keys() == b.keys()
        assert all(math.isclose(a[k], b[k]) for k in a)


def test_poisson_n3_ratio():
    seqs = gw_conditioned_batch(OffspringDistribution.poisson1(), 3, 30_000, seed=1)
    c = Counter(map(tuple, seqs))
    assert set(c) == {(2, 0, 0), (1, 1, 0)}
    # exact law is 1/3 : 2/3
    p = c[(2, 0, 0)] / len(seqs)
    assert abs(p - 1 / 3) < 5 * math.sqrt(2 / 9 / len(seqs))


@pytest.mark.parametrize("off", [BINARY, OffspringDistribution.from_probs([0.5, 0.25, 0, 0.25])],
                         ids=["binary", "ternary"])
@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_conditioned_law_chi_square(off, n):
    seqs = gw_conditioned_batch(off, n, 20_000, seed=n)
    stat, crit = chi_square_vs_law(seqs, gw_conditional_law(list(off.probs), n))
    assert stat <= crit


def test_geometric_preset_small_n():
    off = OffspringDistribution.geom_half()
    seqs = gw_conditioned_batch(off, 4, 20_000, seed=3)
    # untruncated geometric weights over all tree sequences of length 4
    law = gw_conditional_law([0.5 ** (k + 1) for k in range(4)], 4)
    stat, crit = chi_square_vs_law(seqs, law)
    assert stat < crit


def test_batch_reproducible_across_workers():
    a = gw_conditioned_batch(BINARY, 50, 3000, seed=5, workers=1)
    b = gw_conditioned_batch(BINARY, 50, 3000, seed=5, workers=2)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("n", range(1, 9))
def test_subtree_count_matches_parse(n):
    patterns = [t for k in (1, 2, 3) for t in all_ordered_trees(k, BINARY.support)]
    for seed in range(15):
        deg = gw_conditioned_degrees(BINARY, n, seed).degrees
        for t in patterns:
            expect = oracle_fringe_count(deg, t.degrees)
            assert gw_subtree_count(n, t, BINARY, seed) == expect
            assert OrderedTree(deg).fringe_count(t) == expect


def test_cyclic_counts_batch():
    seqs = gw_conditioned_batch(BINARY, 40, 200, seed=6)
    cherry = OrderedTree((2, 0, 0))
    counts = cyclic_counts(seqs, cherry)
    assert np.array_equal(counts, [oracle_fringe_count(list(s), cherry.degrees) for s in seqs])
    assert np.array_equal(gw_subtree_counts(40, cherry, BINARY, 200, seed=6), counts)


def test_degree_indicator():
    assert gw_degree_indicator(OrderedTree((1, 0)), [1, 0]) == 1
    assert gw_degree_indicator(OrderedTree((1, 0)), [0, 1]) == 0
    with pytest.raises(ArityError):
        gw_degree_indicator(LEAF, [0, 0])


def test_offspring_validation():
    with pytest.raises(DomainError):
        OffspringDistribution.from_probs([0.5, 0.0, 0.0, 0.5])
    with pytest.raises(DomainError):
        OffspringDistribution.from_probs([0.0, 1.0])
    with pytest.raises(SpecFileError):
        OffspringDistribution.parse("binomial")
    assert OffspringDistribution.parse({"p": ["1/4", "1/2", "1/4"]}).support == (0, 1, 2)
    po = OffspringDistribution.parse({"preset": "poisson1", "truncate": 20})
    assert po.approximate and po.truncated_mass == pytest.approx(
        1 - sum(math.exp(-1) / math.factorial(k) for k in range(21)), abs=1e-17)


def brute_alpha_beta(stat, probs):
    """alpha and beta from the covariance sums, enumerating ell-tuples of the table."""
    ell = stat.max_size
    mean = sum(k * p for k, p in enumerate(probs))
    var = sum(k * k * p for k, p in enumerate(probs)) - mean**2
    ef = 0.0
    efx = [0.0] * ell
    for w in product(range(len(probs)), repeat=ell):
        pw = math.prod(probs[x] for x in w)
        fv = sum(a * (w[:t.size] == t.degrees) for t, a in zip(stat.trees, stat.coefficients))
        ef += pw * fv
        for j in range(ell):
            efx[j] += pw * fv * w[j]
    alpha = sum(e - ef * mean for e in efx) / var
    return alpha, alpha * mean - ef


@pytest.mark.parametrize("trees, coeffs", [
    (((0,),), (1,)),
    (((1, 0),), (1,)),
    (((2, 0, 0),), (1,)),
    (((0,), (2, 0, 0), (1, 1, 0)), (1, -2, 3)),
])
@pytest.mark.parametrize("off", [BINARY, OffspringDistribution.from_probs([0.5, 0.25, 0, 0.25])],
                         ids=["binary", "ternary"])
def test_alpha_beta_matches_enumeration(trees, coeffs, off):
    stat = LinearSubtreeStatistic(tuple(OrderedTree(t) for t in trees), coeffs)
    a, b = gw_alpha_beta(stat, off)
    ea, eb = brute_alpha_beta(stat, list(off.probs))
    assert a == pytest.approx(ea, abs=1e-12) and b == pytest.approx(eb, abs=1e-12)


def test_poisson_leaf_alpha_beta():
    a, b = gw_alpha_beta(LEAF_STAT, OffspringDistribution.poisson1())
    assert a == pytest.approx(-math.exp(-1), abs=1e-12)
    assert b == pytest.approx(-2 * math.exp(-1), abs=1e-12)


@pytest.mark.parametrize("off", [BINARY, OffspringDistribution.poisson1(), OffspringDistribution.geom_half()],
                         ids=["binary", "poisson", "geom"])
def test_centered_mean_zero(off):
    for t in [LEAF, OrderedTree((1, 0)), OrderedTree((2, 0, 0))]:
        stat = LinearSubtreeStatistic.single(t)
        ms = exact_moments(gw_centered_factor(stat, off), gw_offspring_source(off, True))
        assert abs(ms.mean) < 1e-9


def test_leaf_sigma2_closed_forms():
    # X = 1{xi = 0} - alpha xi + beta with ell = 1
    assert gw_sigma_squared(LEAF_STAT, BINARY) == pytest.approx(1 / 16, abs=1e-12)
    e = math.exp(-1)
    assert gw_sigma_squared(LEAF_STAT, OffspringDistribution.poisson1()) == pytest.approx(e - 2 * e * e, abs=1e-12)


def test_sigma2_exact_vs_mc():
    stat = LinearSubtreeStatistic.single(OrderedTree((2, 0, 0)))
    exact = gw_sigma_squared(stat, BINARY)
    est = gw_sigma_squared(stat, BINARY, mode="mc", n=1000, reps=4000, seed=2)
    assert exact > 0
    assert abs(est.estimate - exact) < 5 * est.std_error + 5 / 1000


def test_centering_decorrelates():
    est = gw_centering_cov_mc(LEAF_STAT, BINARY, 500, 4000, seed=7)
    assert abs(est.estimate) < 5 * est.std_error


def test_fringe_density_vs_sampler():
    counts = gw_subtree_counts(500, OrderedTree((2, 0, 0)), BINARY, 2000, seed=8)
    dens = gw_fringe_density(OrderedTree((2, 0, 0)), BINARY)
    assert dens == pytest.approx(1 / 64)
    se = counts.std(ddof=1) / math.sqrt(len(counts)) / 500
    assert abs(counts.mean() / 500 - dens) < 5 * se + 2 / 500


@pytest.mark.parametrize("trees, coeffs", [
    (((0,),), (1,)),
    (((1, 0),), (2,)),
    (((2, 0, 0), (0,)), (1, 1)),
    (((2, 1, 0, 0),), (-1,)),
])
def test_certificate(trees, coeffs):
    stat = LinearSubtreeStatistic(tuple(OrderedTree(t) for t in trees), coeffs)
    cert = gw_degeneracy_argument(stat, BINARY)
    assert all(s == 0 for s in cert.constant_sums.values())
    assert set(cert.constant_sums) == {1, 2}
    assert cert.s_embedded - cert.s_background == pytest.approx(cert.a1)
    chk = cert.replay(stat)
    assert chk.differs and (chk.s_a, chk.s_b) == (cert.s_background, cert.s_embedded)
    assert gw_sigma_squared(stat, BINARY) > 0


def test_certificate_excluded_support():
    off = OffspringDistribution.from_probs([0.5, 0, 0.5])
    with pytest.raises(UnsupportedError):
        gw_degeneracy_argument(LEAF_STAT, off)
    # Z_n fixes the leaf count here, so the centred variance vanishes
    assert gw_sigma_squared(LEAF_STAT, off) == 0
