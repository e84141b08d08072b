"""Monte Carlo checks of the central limit theorem and its degenerate case.

Pass thresholds are engineering choices: normality is judged by the
standardized fourth moment (within 5 standard errors of 3) and by the
Kolmogorov distance to N(0, 1) (below the one-sample critical value at
level ``alpha``). Both are calibration, not a convergence-rate claim.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from . import rng as _rng
from .blockfactor import BlockFactor, SourceDistribution, simulate_sums
from .catalog import RN_M2, RN_M4, rn_example
from .errors import DomainError
from .variance import exact_moments, jackknife_variance

ALPHA = 0.001


def ks_critical(size: int, alpha: float = ALPHA) -> float:
    """One-sample Kolmogorov critical value."""
    return float(stats.kstwo.ppf(1 - alpha, size))


def ks2_critical(n1: int, n2: int, alpha: float = ALPHA) -> float:
    """Asymptotic two-sample Kolmogorov-Smirnov critical value."""
    return math.sqrt(-math.log(alpha / 2) / 2) * math.sqrt((n1 + n2) / (n1 * n2))


@dataclass
class NRow:
    n: int
    mean: float
    variance: float
    sigma2: float
    sigma2_se: float
    m2: float
    m4: float
    m4_se: float
    ks: float
    ks_critical: float
    normal_pass: bool
    hist_edges: list = field(default_factory=list, repr=False)
    hist_counts: list = field(default_factory=list, repr=False)


@dataclass
class SimulationReport:
    n_values: list
    rows: list
    reps: int
    seed: int
    alpha: float = ALPHA

    CSV_FIELDS = ("n", "mean", "variance", "sigma2", "sigma2_se", "m2", "m4", "m4_se", "ks",
                  "ks_critical", "normal_pass")

    def row(self, n: int) -> NRow:
        return next(r for r in self.rows if r.n == n)

    def to_dict(self) -> dict:
        return {"reps": self.reps, "seed": self.seed, "alpha": self.alpha,
                "n_values": list(self.n_values), "rows": [asdict(r) for r in self.rows]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_FIELDS)
        for r in self.rows:
            d = asdict(r)
            w.writerow([d[k] for k in self.CSV_FIELDS])
        return buf.getvalue()


def describe_sums(n: int, sums: np.ndarray, alpha: float = ALPHA, bins: int = 40) -> NRow:
    reps = len(sums)
    mean = float(np.mean(sums))
    sd = float(np.std(sums))
    z = (sums - mean) / sd if sd > 0 else np.zeros_like(sums)
    z4 = z ** 4
    jk = jackknife_variance(sums)
    ks = float(stats.kstest(z, "norm").statistic) if sd > 0 else 1.0
    crit = ks_critical(reps, alpha)
    m4 = float(z4.mean())
    m4_se = float(z4.std(ddof=1) / math.sqrt(reps))
    counts, edges = np.histogram(z, bins=bins, range=(-5, 5))
    return NRow(
        n=n, mean=mean, variance=jk.estimate, sigma2=jk.estimate / n, sigma2_se=jk.std_error / n,
        m2=float((z * z).mean()), m4=m4, m4_se=m4_se, ks=ks, ks_critical=crit,
        normal_pass=bool(ks < crit and abs(m4 - 3) < 5 * m4_se),
        hist_edges=edges.tolist(), hist_counts=counts.tolist())


def simulate_clt(bf: BlockFactor, src: SourceDistribution, n_list: Sequence[int], reps: int,
                 seed: int = _rng.DEFAULT_SEED, alpha: float = ALPHA, workers: int = 1) -> SimulationReport:
    """Draw ``reps`` paths per n and report normality diagnostics for S_n."""
    if reps < 100:
        raise DomainError("reps must be >= 100")
    rows = []
    for i, n in enumerate(n_list):
        if n < bf.ell:
            raise DomainError(f"n = {n} is below ell = {bf.ell}")
        sums = simulate_sums([bf], src, n, reps, seed, workers=workers, stream=i)[:, 0]
        rows.append(describe_sums(n, sums, alpha))
    return SimulationReport(list(n_list), rows, reps, seed, alpha)


class DistributionCheck(NamedTuple):
    distance: float
    passed: bool
    threshold: float


def _centered_sums(bf, src, n, reps, seed, stream, workers, mu):
    sums = simulate_sums([bf], src, n, reps, seed, workers=workers, stream=stream)[:, 0]
    if mu is None and bf.is_table and src.is_finite:
        mu = float(exact_moments(bf, src).mean)
    return sums - (n * mu if mu is not None else sums.mean())


def degenerate_distribution_check(bf: BlockFactor, src: SourceDistribution, n1: int, n2: int,
                                  reps: int, seed: int = _rng.DEFAULT_SEED, alpha: float = ALPHA,
                                  mu: float | None = None, workers: int = 1,
                                  return_samples: bool = False):
    """Two-sample Kolmogorov distance between S_{n1} - E S_{n1} and S_{n2} - E S_{n2}.

    For a degenerate factor both have the law of Y_0 - Y_0' once n >= m.
    The mean is exact for finite sources, ``mu`` when given, and the sample
    mean otherwise.
    """
    if min(n1, n2) < bf.ell - 1 or min(n1, n2) < 1:
        raise DomainError("n1 and n2 must be >= m")
    a = _centered_sums(bf, src, n1, reps, seed, 0, workers, mu)
    b = _centered_sums(bf, src, n2, reps, seed, 1, workers, mu)
    d = float(stats.ks_2samp(a, b).statistic)
    thr = ks2_critical(reps, reps, alpha)
    out = DistributionCheck(d, d < thr, thr)
    return (out, a, b) if return_samples else out


def normal_distance(samples: np.ndarray, variance: float, alpha: float = ALPHA) -> DistributionCheck:
    """Kolmogorov distance of ``samples`` to N(0, variance)."""
    d = float(stats.kstest(samples, "norm", args=(0.0, math.sqrt(variance))).statistic)
    thr = ks_critical(len(samples), alpha)
    return DistributionCheck(d, d < thr, thr)


class RNMoments(NamedTuple):
    m2: float
    m4: float
    std_errors: tuple


def rn_example_moments(reps: int, seed: int = _rng.DEFAULT_SEED, workers: int = 1) -> RNMoments:
    """Plain Monte Carlo estimates of E X^2 and E X^4 for the catalog example."""
    if reps < 10_000:
        raise DomainError("reps must be >= 10^4")
    bf, src = rn_example()

    def chunk(gen, size):
        x = bf.func(src.draw(gen, (size, 3)))
        x2 = x * x
        return np.stack([x2, x2 * x2], axis=1)

    mom = np.concatenate(_rng.run_chunks(chunk, reps, seed, workers=workers, chunk=1 << 16))
    est = mom.mean(axis=0)
    se = mom.std(axis=0, ddof=1) / math.sqrt(reps)
    return RNMoments(float(est[0]), float(est[1]), (float(se[0]), float(se[1])))


RN_TARGETS = {"m2": RN_M2, "m4": RN_M4}


@dataclass
class CovarianceEstimate:
    labels: list
    matrix: np.ndarray
    min_eigenvalue: float
    min_eigenvalue_ci: tuple
    diagonal_se: np.ndarray
    reps: int
    n: int

    def to_dict(self) -> dict:
        return {"labels": self.labels, "matrix": self.matrix.tolist(),
                "min_eigenvalue": self.min_eigenvalue,
                "min_eigenvalue_ci": list(self.min_eigenvalue_ci),
                "diagonal_se": self.diagonal_se.tolist(), "reps": self.reps, "n": self.n}


def _min_eig(cov: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((cov + cov.T) / 2)[0])


def covariance_matrix_mc(factors: Sequence[BlockFactor], src: SourceDistribution, n: int, reps: int,
                         seed: int = _rng.DEFAULT_SEED, labels: Sequence[str] | None = None,
                         bootstrap: int = 200, workers: int = 1) -> CovarianceEstimate:
    """n^-1 Cov(S_n^(i), S_n^(j)) from coupled paths, with a bootstrap CI for the smallest eigenvalue."""
    sums = simulate_sums(factors, src, n, reps, seed, workers=workers)
    mat = np.atleast_2d(np.cov(sums, rowvar=False, ddof=1)) / n
    mat = (mat + mat.T) / 2
    boot = []
    gen = _rng.generator(seed, 99)
    for _ in range(bootstrap):
        idx = gen.integers(0, reps, reps)
        boot.append(_min_eig(np.atleast_2d(np.cov(sums[idx], rowvar=False, ddof=1)) / n))
    ci = (float(np.percentile(boot, 2.5)), float(np.percentile(boot, 97.5))) if boot else (math.nan,) * 2
    diag_se = np.array([jackknife_variance(sums[:, j]).std_error / n for j in range(len(factors))])
    labels = list(labels) if labels is not None else [bf.name or f"f{j}" for j, bf in enumerate(factors)]
    return CovarianceEstimate(labels, mat, _min_eig(mat), ci, diag_se, reps, n)
