"""Asymptotic variance and the coboundary decomposition.

For a finite source everything here is exact: moments are sums over the
joint law of overlapping windows, and degeneracy is decided by looking for
a potential on the window graph (vertices are ``(ell-1)``-windows, every
``ell``-window ``x`` is an edge from its prefix to its suffix with weight
``f(x) - mu``). ``sigma2 == 0`` exactly when such a potential exists.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from . import rng as _rng
from .blockfactor import (BlockFactor, SourceDistribution, _jsonable, evaluate_window,
                          factor_values, simulate_sums)
from .errors import ArityError, DomainError, ResourceError, UnsupportedError

TOL = 1e-9
ENUM_BUDGET = 20_000_000


class Estimate(NamedTuple):
    estimate: float
    std_error: float


@dataclass(frozen=True)
class MomentSummary:
    mean: float | Fraction
    variance: float | Fraction
    covariances: tuple  # Cov(X_0, X_k) for k = 1..m
    sigma2: float | Fraction
    exact: bool = False

    @property
    def m(self) -> int:
        return len(self.covariances)

    def to_dict(self) -> dict:
        return {
            "mean": float(self.mean),
            "variance": float(self.variance),
            "covariances": [float(c) for c in self.covariances],
            "sigma2": float(self.sigma2),
            "exact": self.exact,
            "sigma2_exact": str(self.sigma2) if self.exact else None,
        }


def _check_budget(bf: BlockFactor, src: SourceDistribution, budget: int) -> None:
    if not src.is_finite:
        raise UnsupportedError("exact computations need a finite-discrete source; use Monte Carlo")
    bf.check_source(src)
    cells = src.size ** bf.ell
    if cells > budget:
        raise ResourceError(
            f"enumeration needs {cells} cells, budget is {budget}; use Monte Carlo instead")


def _probs(src: SourceDistribution, exact: bool) -> np.ndarray:
    if exact:
        p = np.empty(src.size, dtype=object)
        p[:] = [Fraction(x) for x in src.probs]
        return p
    return src.prob_array()


def _weight(p: np.ndarray, axes: Sequence[int], ndim: int) -> np.ndarray:
    """Product of ``p`` over the given axes, broadcast against ``ndim`` axes."""
    w = np.ones((1,) * ndim, dtype=p.dtype)
    for ax in axes:
        shape = [1] * ndim
        shape[ax] = len(p)
        w = w * p.reshape(shape)
    return w


def _lag_products(F: np.ndarray, p: np.ndarray) -> list:
    """E[X_0 X_k] for k = 0..ell-1.

    Given the ``ell - k`` shared coordinates, the two windows depend on
    disjoint independent coordinates, so the sum factorizes over the
    overlap and costs O(K^ell) per lag.
    """
    ell = F.ndim
    full = F * _weight(p, range(ell), ell)
    out = [(full * F).sum()]
    for k in range(1, ell):
        left = full.sum(axis=tuple(range(k)))  # weighted f, summed over x_0..x_{k-1}
        right = (F * _weight(p, range(ell - k, ell), ell)).sum(axis=tuple(range(ell - k, ell)))
        out.append((left * right).sum())
    return out


def exact_moments(bf: BlockFactor, src: SourceDistribution, exact: bool | None = None,
                  tol: float = TOL, budget: int = ENUM_BUDGET) -> MomentSummary:
    """Mean, variance, lagged covariances and sigma^2 by exact summation.

    ``exact`` defaults to rational arithmetic whenever both the table and
    the atom probabilities are rational; tolerance is then zero.
    """
    _check_budget(bf, src, budget)
    if exact is None:
        exact = bf.is_exact and src.is_exact
    F = bf.table if exact else bf.float_table()
    if exact and F.dtype != object:
        F = np.vectorize(Fraction, otypes=[object])(F)
    p = _probs(src, exact)
    mean = (F * _weight(p, range(bf.ell), bf.ell)).sum()
    prods = _lag_products(F, p)
    cov = [e - mean * mean for e in prods]
    sigma2 = cov[0] + 2 * sum(cov[1:], 0 if exact else 0.0)
    if not exact:
        mean, sigma2 = float(mean), float(sigma2)
        cov = [float(c) for c in cov]
        if abs(sigma2) <= tol:
            sigma2 = 0.0
    return MomentSummary(mean, cov[0], tuple(cov[1:]), sigma2, exact=exact)


def var_Sn_from_moments(ms: MomentSummary, n: int):
    m = ms.m
    if n >= m:
        return n * ms.sigma2 - 2 * sum(k * c for k, c in enumerate(ms.covariances, start=1))
    return n * ms.variance + 2 * sum((n - k) * ms.covariances[k - 1] for k in range(1, n))


def var_Sn_exact(bf: BlockFactor, src: SourceDistribution, n: int, exact: bool | None = None,
                 budget: int = ENUM_BUDGET):
    """Var(S_n); closed form for n >= m, direct covariance sum below."""
    if n < 1:
        raise DomainError("n must be >= 1")
    ms = exact_moments(bf, src, exact=exact, tol=0.0, budget=budget)
    return var_Sn_from_moments(ms, n)


def jackknife_variance(x: np.ndarray) -> Estimate:
    """Sample variance of ``x`` with its delete-one jackknife standard error."""
    x = np.asarray(x, dtype=float)
    r = len(x)
    if r < 3:
        raise DomainError("need at least 3 replicas for a jackknife standard error")
    d = x - x.mean()
    s1, s2 = d.sum(), (d * d).sum()
    loo = (s2 - d * d - (s1 - d) ** 2 / (r - 1)) / (r - 2)
    se = np.sqrt((r - 1) / r * ((loo - loo.mean()) ** 2).sum())
    return Estimate(float(s2 / (r - 1) - s1 * s1 / (r * (r - 1))), float(se))


def sigma_squared_mc(bf: BlockFactor, src: SourceDistribution, n: int, reps: int,
                     seed: int = _rng.DEFAULT_SEED, workers: int = 1) -> Estimate:
    """Estimate Var(S_n)/n from ``reps`` independent paths.

    Var(S_n)/n = sigma^2 + O(1/n), so the estimate carries a bias of
    order 1/n (exactly -2 sum_k k Cov(X_0, X_k) / n); no correction is made.
    """
    if n < bf.ell:
        raise DomainError("n must be >= ell")
    if reps < 3:
        raise DomainError("reps must be >= 3")
    sums = simulate_sums([bf], src, n, reps, seed, workers=workers)[:, 0]
    est = jackknife_variance(sums)
    return Estimate(est.estimate / n, est.std_error / n)


# --- coboundary decomposition ---------------------------------------------

@dataclass(frozen=True)
class CoboundaryResult:
    verdict: str  # "degenerate" | "nondegenerate"
    mu: float | Fraction
    g: dict | None = None
    witness: list | None = None
    witness_sum: float | Fraction | None = None
    components: int = 1

    @property
    def degenerate(self) -> bool:
        return self.verdict == "degenerate"

    def to_dict(self) -> dict:
        out = {"verdict": self.verdict, "mu": _jsonable(self.mu), "components": self.components}
        if self.g is not None:
            out["g"] = [{"window": [_jsonable(v) for v in w], "value": _jsonable(val)}
                        for w, val in self.g.items()]
        if self.witness is not None:
            out["witness"] = [[_jsonable(v) for v in w] for w in self.witness]
            out["witness_sum"] = _jsonable(self.witness_sum)
        return out


def _tree_paths(nv: int, k: int, root: int, comp: np.ndarray, forward: bool):
    """BFS tree from ``root`` along (forward) or against edges; parent edge per vertex."""
    parent = {root: None}
    q = deque([root])
    while q:
        u = q.popleft()
        for a in range(k):
            if forward:
                e = u * k + a
                v = e % nv
            else:
                e = a * nv + u
                v = e // k
            if v not in parent and comp[v] == comp[root]:
                parent[v] = e
                q.append(v)
    return parent


def _walk_out(parent, nv, k, v):
    """Edges of the out-tree path root -> v."""
    path = []
    while parent[v] is not None:
        e = parent[v]
        path.append(e)
        v = e // k
    return path[::-1]


def _walk_in(parent, nv, k, v):
    """Edges of the in-tree path v -> root."""
    path = []
    while parent[v] is not None:
        e = parent[v]
        path.append(e)
        v = e % nv
    return path


def coboundary_decompose(bf: BlockFactor, src: SourceDistribution, tol: float = TOL,
                         exact: bool | None = None, order: Sequence[int] | None = None,
                         budget: int = ENUM_BUDGET) -> CoboundaryResult:
    """Find g with f(x) = g(x_2..x_ell) - g(x_1..x_{ell-1}) + mu, or a cycle witness.

    ``order`` optionally permutes the vertex codes (0..K^(ell-1)-1) to change
    the traversal; g is then shifted by a constant per component. In exact
    mode the tolerance is zero.
    """
    _check_budget(bf, src, budget)
    if exact is None:
        exact = bf.is_exact and src.is_exact
    if exact:
        tol = 0
    ms = exact_moments(bf, src, exact=exact, tol=0.0, budget=budget)
    mu = ms.mean
    F = bf.table if exact else bf.float_table()
    k, ell = src.size, bf.ell
    flat = F.ravel()
    w = [flat[e] - mu for e in range(k**ell)]
    atoms = src.values

    def window(code: int, length: int) -> tuple:
        digits = []
        for _ in range(length):
            code, r = divmod(code, k)
            digits.append(atoms[r])
        return tuple(digits[::-1])

    if ell == 1:
        bad = [e for e in range(k) if abs(w[e]) > tol]
        if not bad:
            return CoboundaryResult("degenerate", mu, g={(): 0 * mu})
        e = max(bad, key=lambda i: abs(w[i]))
        return CoboundaryResult("nondegenerate", mu, witness=[window(e, 1)], witness_sum=w[e])

    nv = k ** (ell - 1)
    verts = list(order) if order is not None else list(range(nv))
    if sorted(verts) != list(range(nv)):
        raise DomainError("order must be a permutation of the vertex codes")
    rank = {v: i for i, v in enumerate(verts)}

    g: dict[int, object] = {}
    comp = np.full(nv, -1)
    ncomp = 0
    for start in verts:
        if start in g:
            continue
        g[start] = 0 * mu
        comp[start] = ncomp
        q = deque([start])
        while q:
            u = q.popleft()
            nbrs = []
            for a in range(k):
                e = u * k + a
                nbrs.append((e % nv, g[u] + w[e]))
                e = a * nv + u
                nbrs.append((e // k, g[u] - w[e]))
            nbrs.sort(key=lambda t: rank[t[0]])
            for v, val in nbrs:
                if v not in g:
                    g[v] = val
                    comp[v] = ncomp
                    q.append(v)
        ncomp += 1

    resid = [g[e % nv] - g[e // k] - w[e] for e in range(k**ell)]
    if all(abs(r) <= tol for r in resid):
        table = {window(v, ell - 1): g[v] for v in range(nv)}
        return CoboundaryResult("degenerate", mu, g=table, components=ncomp)

    # Directed witness: within a strongly connected component, with
    # phi(v) = weight of the out-tree path root -> v, the closed walks
    # root->u->v->root and root->v->root differ by phi(u) + w(u,v) - phi(v).
    bad_edge = max(range(k**ell), key=lambda e: abs(resid[e]))
    root = next(v for v in verts if comp[v] == comp[bad_edge // k])
    out_par = _tree_paths(nv, k, root, comp, forward=True)
    in_par = _tree_paths(nv, k, root, comp, forward=False)

    def closed(edges):
        return edges, sum((w[e] for e in edges), 0 * mu)

    best = None
    for e in sorted(range(k**ell), key=lambda e: -abs(resid[e])):
        u, v = e // k, e % nv
        if u not in out_par or v not in in_par:
            continue
        cands = [closed(_walk_out(out_par, nv, k, u) + [e] + _walk_in(in_par, nv, k, v)),
                 closed(_walk_out(out_par, nv, k, v) + _walk_in(in_par, nv, k, v))]
        for edges, s in cands:
            if edges and (best is None or abs(s) > abs(best[1])):
                best = (edges, s)
        if best is not None and abs(best[1]) > tol:
            break
    edges, total = best
    return CoboundaryResult("nondegenerate", mu, witness=[window(e, ell) for e in edges],
                            witness_sum=total, components=ncomp)


def walk_sum(bf: BlockFactor, walk: Sequence[Sequence], mu) -> object:
    """Sum of f - mu along a list of windows."""
    return sum((evaluate_window(bf, win) - mu for win in walk), 0 * mu)


def is_closed_walk(walk: Sequence[Sequence]) -> bool:
    if not walk:
        return False
    for a, b in zip(walk, list(walk[1:]) + [walk[0]]):
        if tuple(a[1:]) != tuple(b[:-1]):
            return False
    return True


# --- positivity witnesses and the Cesaro estimator --------------------------

class WitnessCheck(NamedTuple):
    differs: bool
    s_a: float
    s_b: float


def _config_sum(bf: BlockFactor, seq: Sequence):
    ell = bf.ell
    if bf.is_table:
        vals = [evaluate_window(bf, seq[i:i + ell]) for i in range(len(seq) - ell + 1)]
        return sum(vals, 0 * vals[0])
    arr = np.asarray(seq, dtype=float)
    wins = np.lib.stride_tricks.sliding_window_view(arr, ell, axis=0)
    if arr.ndim == 2:
        wins = np.swapaxes(wins, -1, -2)
    return float(np.sum(bf.func(wins)))


def rc2_witness_check(bf: BlockFactor, boundary_left: Sequence, boundary_right: Sequence,
                      middle_a: Sequence, middle_b: Sequence, tol: float = TOL) -> WitnessCheck:
    """Compare S_n on two configurations sharing both boundaries.

    ``differs`` certifies sigma^2 > 0: under a coboundary decomposition S_n
    is a function of the boundary values alone.
    """
    m = bf.ell - 1
    if len(boundary_left) != m or len(boundary_right) != m:
        raise ArityError(f"boundaries must have length ell - 1 = {m}")
    if len(middle_a) != len(middle_b):
        raise ArityError("middles must have equal length")
    if len(middle_a) < 1:
        raise ArityError("middles must be non-empty")
    if not bf.is_table and not bf.locally_constant:
        raise UnsupportedError(
            f"factor {bf.name or '<anonymous>'} is not declared locally constant; "
            "a single configuration has probability zero")
    seq_a = list(boundary_left) + list(middle_a) + list(boundary_right)
    seq_b = list(boundary_left) + list(middle_b) + list(boundary_right)
    s_a, s_b = _config_sum(bf, seq_a), _config_sum(bf, seq_b)
    return WitnessCheck(bool(abs(s_a - s_b) > tol), s_a, s_b)


def cesaro_coboundary_estimate(bf: BlockFactor, src: SourceDistribution, window: Sequence,
                               n: int, reps: int, seed: int = _rng.DEFAULT_SEED,
                               mu: float | None = None, workers: int = 1) -> Estimate:
    """Monte Carlo estimate of g(window) - E g for a degenerate factor.

    With xi_{k+1..k+ell-1} pinned to ``window``, averages the Cesaro mean
    (n+1)^-1 sum_{j=k-n}^{k} S_{j,k} of the centred sums over replicas.
    The bias is O(ell/n). When ``mu`` is not given and the source is not
    finite it is estimated from independent paths and its error is
    propagated into the standard error.
    """
    m = bf.ell - 1
    if len(window) != m:
        raise ArityError(f"window must have length ell - 1 = {m}")
    if n < bf.ell:
        raise DomainError("n must be >= ell")
    mu_se = 0.0
    if mu is None:
        if src.is_finite:
            mu = float(exact_moments(bf, src).mean)
        else:
            big = max(reps, 1000)
            sums = simulate_sums([bf], src, n, big, seed, workers=workers, stream=1)[:, 0] / n
            mu, mu_se = float(sums.mean()), float(sums.std(ddof=1) / np.sqrt(big))
    weights = np.arange(1, n + 2) / (n + 1)
    if bf.is_table:
        pinned = np.array([src.index_of(v) for v in window], dtype=np.intp)
    else:
        pinned = np.asarray(window, dtype=float)

    def chunk(gen, size):
        if bf.is_table:
            free = src.draw_indices(gen, (size, n + 1))
            draws = np.concatenate([free, np.broadcast_to(pinned, (size, m))], axis=1)
            x = bf.float_table().ravel()[bf.encode(
                np.lib.stride_tricks.sliding_window_view(draws, bf.ell, axis=1))]
        else:
            free = src.draw(gen, (size, n + 1))
            tail = np.broadcast_to(pinned, (size,) + pinned.shape)
            if free.ndim == 3 and tail.ndim == 2:
                tail = tail.reshape(size, m, -1)
            draws = np.concatenate([free, tail], axis=1)
            x = factor_values(bf, draws, n + 1)
        return (x - mu) @ weights

    vals = np.concatenate(_rng.run_chunks(chunk, reps, seed, workers=workers))
    se = float(np.sqrt(vals.var(ddof=1) / reps + (mu_se * (n + 2) / 2) ** 2))
    return Estimate(float(vals.mean()), se)
