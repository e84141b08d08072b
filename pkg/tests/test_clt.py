import csv
import io
import math

import numpy as np
import pytest

from mdep.blockfactor import BlockFactor
from mdep.catalog import RN_M2, RN_M4, rn_example
from mdep.clt import (covariance_matrix_mc, degenerate_distribution_check, describe_sums,
                      ks2_critical, ks_critical, normal_distance, rn_example_moments, simulate_clt)
from mdep.errors import DomainError
from mdep.variance import exact_moments


def test_rn_constants():
    assert RN_M2 == pytest.approx(2.424413, abs=1e-6)
    assert RN_M4 == pytest.approx(15.395305, abs=1e-6)


def test_ks_critical_asymptotics():
    # sqrt(-log(alpha / 2) / 2) = 1.9495 at alpha = 0.001
    assert ks_critical(100_000) * math.sqrt(100_000) == pytest.approx(1.9495, abs=2e-3)
    assert ks2_critical(1000, 1000) == pytest.approx(1.9495 * math.sqrt(2 / 1000), rel=1e-3)


def test_describe_sums_normal_vs_bimodal():
    rng = np.random.default_rng(0)
    assert describe_sums(10, rng.normal(3, 2, 20_000)).normal_pass
    bimodal = rng.choice([-1.0, 1.0], 20_000) + rng.normal(0, 0.1, 20_000)
    row = describe_sums(10, bimodal)
    assert not row.normal_pass and row.m2 == pytest.approx(1.0)


def test_simulate_clt_product(product_factor, bern):
    rep = simulate_clt(product_factor, bern, [4, 400], 4000, seed=1)
    row = rep.row(400)
    assert row.normal_pass
    assert abs(row.sigma2 - 5 / 16) < 5 * row.sigma2_se + 0.01
    assert not rep.row(4).normal_pass


def test_simulate_clt_csv_and_dict(product_factor, bern):
    rep = simulate_clt(product_factor, bern, [5, 10], 200, seed=2)
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert [int(r["n"]) for r in rows] == [5, 10]
    assert float(rows[0]["mean"]) == pytest.approx(rep.rows[0].mean)
    assert rep.to_dict()["n_values"] == [5, 10]


def test_simulate_clt_preconditions(product_factor, bern):
    with pytest.raises(DomainError):
        simulate_clt(product_factor, bern, [10], 50)
    with pytest.raises(DomainError):
        simulate_clt(product_factor, bern, [1], 500)


def test_degenerate_check_difference(difference_factor, bern):
    # S_n = xi_{n+1} - xi_1 for every n
    assert degenerate_distribution_check(difference_factor, bern, 2, 30, 5000, seed=3).passed


def test_degenerate_check_rejects_growth(product_factor, bern):
    assert not degenerate_distribution_check(product_factor, bern, 10, 100, 5000, seed=4).passed


def test_normal_distance():
    x = np.random.default_rng(1).normal(0, math.sqrt(2), 10_000)
    assert normal_distance(x, 2.0).passed
    assert not normal_distance(x, 1.0).passed


def test_rn_moments_small():
    est = rn_example_moments(200_000, seed=5)
    assert abs(est.m2 - RN_M2) < 5 * est.std_errors[0]
    assert abs(est.m4 - RN_M4) < 5 * est.std_errors[1]


def test_rn_moments_reproducible_across_workers():
    assert rn_example_moments(100_000, seed=6) == rn_example_moments(100_000, seed=6, workers=3)


def test_rn_degenerate_small():
    bf, src = rn_example()
    chk = degenerate_distribution_check(bf, src, 3, 20, 5000, seed=7, mu=0.0)
    assert chk.passed


def test_covariance_matrix_polarization(product_factor, difference_factor, bern):
    both = BlockFactor.from_table((0, 1), 2, product_factor.table.ravel() + difference_factor.table.ravel())
    s_f = exact_moments(product_factor, bern).sigma2
    s_g = exact_moments(difference_factor, bern).sigma2
    cross = (exact_moments(both, bern).sigma2 - s_f - s_g) / 2
    est = covariance_matrix_mc([product_factor, difference_factor], bern, 400, 8000, seed=8, bootstrap=50)
    assert est.matrix.shape == (2, 2)
    assert abs(est.matrix[0, 0] - float(s_f)) < 5 * est.diagonal_se[0] + 0.01
    assert abs(est.matrix[0, 1] - float(cross)) < 0.02
    assert est.min_eigenvalue_ci[0] <= est.min_eigenvalue + 1e-12
