"""Fringe subtrees of random binary search trees as window statistics.

Devroye's construction: with U_1..U_n i.i.d. uniform, insert the indices
1..n in increasing order of U. The subtree rooted at the minimum of a block
U_i..U_j is a fringe subtree exactly when U_{i-1} and U_{j+1} are both
smaller than everything in the block (U_0 = U_{n+1} = 0), and its shape is
the min-rooted Cartesian tree of the block.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from . import rng as _rng
from .blockfactor import BlockFactor, SourceDistribution
from .errors import ArityError, DomainError
from .trees import BinaryTree, LinearSubtreeStatistic, cartesian_code
from .variance import WitnessCheck, rc2_witness_check


def bst_from_keys(keys: Sequence[float]) -> BinaryTree:
    """Shape of the binary search tree built by inserting ``keys`` in order."""
    keys = list(keys)
    if len(set(keys)) != len(keys):
        raise DomainError("keys must be pairwise distinct")
    if not keys:
        return BinaryTree.empty()
    left = [-1] * len(keys)
    right = [-1] * len(keys)
    for i in range(1, len(keys)):
        v = 0
        while True:
            side = left if keys[i] < keys[v] else right
            if side[v] == -1:
                side[v] = i
                break
            v = side[v]
    parts = []
    todo = [0]
    while todo:
        v = todo.pop()
        if v == -1:
            parts.append("0")
            continue
        parts.append("1")
        todo.extend((right[v], left[v]))
    return BinaryTree("".join(parts))


def bst_uniforms(n: int, seed: int) -> np.ndarray:
    return _rng.generator(seed).random(n)


def bst_devroye_tree(n: int, seed: int) -> BinaryTree:
    """Random BST on keys 1..n inserted in increasing order of U_1..U_n."""
    if n < 0:
        raise DomainError("n must be >= 0")
    u = bst_uniforms(n, seed)
    return bst_from_keys(list(np.argsort(u, kind="stable") + 1))


def fringe_indicator_array(tree: BinaryTree, windows: np.ndarray) -> np.ndarray:
    """Vectorized f_T on windows of shape (..., |T| + 2).

    Interior shape is checked node by node: the root of every subtree sits
    at the minimum of that subtree's inorder interval.
    """
    k = tree.size
    w = np.asarray(windows, dtype=float)
    if w.shape[-1] != k + 2:
        raise ArityError(f"window length must be |T| + 2 = {k + 2}")
    inner = w[..., 1:k + 1]
    ok = np.maximum(w[..., 0], w[..., k + 1]) < inner.min(axis=-1)
    for root, lo, hi in tree.intervals():
        if hi > lo:
            ok &= np.argmin(inner[..., lo:hi + 1], axis=-1) == root - lo
    return ok.astype(float)


def bst_fringe_indicator(tree: BinaryTree, window: Sequence[float]) -> int:
    """1 iff the middle of ``window`` is a fringe block of shape ``tree``."""
    if len(window) != tree.size + 2:
        raise ArityError(f"window length must be |T| + 2 = {tree.size + 2}")
    if len(set(window[1:-1])) != tree.size or set(window[1:-1]) & {window[0], window[-1]}:
        raise DomainError("window entries must be distinct")
    lo = max(window[0], window[-1])
    if not all(x > lo for x in window[1:-1]):
        return 0
    return int(cartesian_code(list(window[1:-1])) == tree)


def bst_factor(stat: LinearSubtreeStatistic | BinaryTree) -> BlockFactor:
    """Block factor f = sum_j a_j f_{T_j} with ell = max |T_j| + 2 over uniforms."""
    if isinstance(stat, BinaryTree):
        stat = LinearSubtreeStatistic.single(stat)
    trees, coeffs = stat.trees, stat.coefficients
    ell = stat.max_size + 2

    def f(windows):
        out = np.zeros(windows.shape[:-1])
        for t, a in zip(trees, coeffs):
            out += a * fringe_indicator_array(t, windows[..., :t.size + 2])
        return out

    name = "bst:" + "+".join(f"{a}*{t.code}" for t, a in zip(trees, coeffs))
    return BlockFactor.from_function(f, ell, name=name, locally_constant=True, stat=stat)


def count_from_uniforms(u: np.ndarray, tree: BinaryTree) -> np.ndarray:
    """Exact fringe count for each row of ``u`` (rows, n), padding U_0 = U_{n+1} = 0."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    rows, n = u.shape
    k = tree.size
    if k > n:
        return np.zeros(rows, dtype=np.int64)
    padded = np.zeros((rows, n + 2))
    padded[:, 1:n + 1] = u
    wins = np.lib.stride_tricks.sliding_window_view(padded, k + 2, axis=1)
    return fringe_indicator_array(tree, wins).sum(axis=1).astype(np.int64)


def bst_subtree_count(n: int, tree: BinaryTree, seed: int) -> int:
    """n_T of the Devroye tree for ``seed`` via the padded window sum."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return int(count_from_uniforms(bst_uniforms(n, seed), tree)[0])


def bst_block_sum(u: Sequence[float], stat: LinearSubtreeStatistic) -> float:
    """Pure block-factor sum over U_1..U_n (no padding); differs from F by O(1)."""
    bf = bst_factor(stat)
    u = np.asarray(u, dtype=float)
    count = len(u) - bf.ell + 1
    if count < 1:
        return 0.0
    wins = np.lib.stride_tricks.sliding_window_view(u, bf.ell)
    return float(bf.func(wins).sum())


def bst_subtree_counts(n: int, tree: BinaryTree, reps: int, seed: int, workers: int = 1) -> np.ndarray:
    """Exact fringe counts for ``reps`` independent Devroye trees."""
    block = max(1, 2_000_000 // (n + 2))

    def chunk(gen, size):
        out = []
        for lo in range(0, size, block):
            out.append(count_from_uniforms(gen.random((min(block, size - lo), n)), tree))
        return np.concatenate(out)

    return np.concatenate(_rng.run_chunks(chunk, reps, seed, workers=workers))


class BSTWitness(NamedTuple):
    u_prime: np.ndarray
    u_double_prime: np.ndarray


def bst_witness_configuration(stat: LinearSubtreeStatistic, n: int) -> BSTWitness:
    """Increasing U (a right path) and a copy with one block permuted.

    The block at positions ell..ell+k (1-based, k = |T_1|) keeps its values
    but puts the smallest last and arranges the rest so that they form a
    copy of T_1 hanging left of the ell-th spine node.
    """
    stat = stat.nonzero()
    ell = stat.max_size + 2
    if n <= 3 * ell:
        raise DomainError(f"n must exceed 3 * (max |T_j| + 2) = {3 * ell}")
    t1 = stat.trees[0]
    k = t1.size
    u1 = np.arange(1, n + 1) / (n + 1)
    u2 = u1.copy()
    block = u1[ell - 1:ell + k]
    u2[ell + k - 1] = block[0]
    u2[ell - 1:ell + k - 1] = block[1:][t1.heap_ranks()]
    return BSTWitness(u1, u2)


def bst_witness_check(stat: LinearSubtreeStatistic, n: int) -> tuple[BSTWitness, float, float, WitnessCheck]:
    """Build the witness pair and replay it through the positivity check.

    Returns the configurations, F on both Devroye trees, and the check on
    the block-factor sums with boundaries of length ell - 1 held fixed.
    """
    stat = stat.nonzero()
    wit = bst_witness_configuration(stat, n)
    trees = [bst_from_keys(list(np.argsort(u) + 1)) for u in wit]
    f1, f2 = (stat.evaluate(t) for t in trees)
    bf = bst_factor(stat)
    m = bf.ell - 1
    u1, u2 = wit
    chk = rc2_witness_check(bf, u1[:m], u1[n - m:], u1[m:n - m], u2[m:n - m])
    return wit, f1, f2, chk


def uniform_source() -> SourceDistribution:
    return SourceDistribution.uniform()
