"""Limiting fringe densities E n_T / n used as Monte Carlo targets."""

from __future__ import annotations

import math

from .trees import BinaryTree, OffspringDistribution, OrderedTree


def bst_fringe_density(tree: BinaryTree) -> float:
    """P(f_T = 1) for i.i.d. uniforms: 2 / ((k+1)(k+2)) times P(shape = T).

    Boundaries below a block of k values happen with probability
    2 / ((k+1)(k+2)); the block's Cartesian tree is T with probability
    prod over nodes of 1 / |subtree|.
    """
    k = tree.size
    shape = math.prod(1.0 / (hi - lo + 1) for _, lo, hi in tree.intervals())
    return 2.0 / ((k + 1) * (k + 2)) * shape


def gw_fringe_density(tree: OrderedTree, off: OffspringDistribution) -> float:
    """P(unconditioned GW tree = T) = prod of p_d over the degree sequence."""
    p = off.float_probs()
    return math.prod(p[d] if d < len(p) else 0.0 for d in tree.degrees)
