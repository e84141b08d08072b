"""Named block factors for non-finite sources."""

from __future__ import annotations

import numpy as np

from .blockfactor import BlockFactor, SourceDistribution

RN_M2 = 2 + 4 / (3 * np.pi)
RN_M4 = 12 + 32 / (3 * np.pi)


def rn_y(u_now, u_next, normal):
    return np.sign(u_now - u_next) * np.abs(normal)


def rn_example() -> tuple[BlockFactor, SourceDistribution]:
    """X_k = Y_k - Y_{k-1} with Y_k = sign(U_k - U_{k+1}) |N_k|.

    Each source value is a (uniform, standard normal) pair; the window is
    (xi_{k-1}, xi_k, xi_{k+1}). The Y_k are 1-dependent standard normals,
    so S_n = Y_n - Y_0 ~ N(0, 2) for n >= 2, yet X_k itself is not normal.
    """

    def f(w):
        u, z = w[..., 0], w[..., 1]
        return rn_y(u[..., 1], u[..., 2], z[..., 1]) - rn_y(u[..., 0], u[..., 1], z[..., 0])

    bf = BlockFactor.from_function(f, 3, name="rn-example")
    return bf, SourceDistribution.composite("uniform", "normal")


def uniform_difference() -> tuple[BlockFactor, SourceDistribution]:
    bf = BlockFactor.from_function(lambda w: w[..., 1] - w[..., 0], 2, name="difference")
    return bf, SourceDistribution.uniform()


def build(name: str, params: dict | None = None) -> tuple[BlockFactor, SourceDistribution]:
    params = params or {}
    if name == "rn-example":
        return rn_example()
    if name == "difference":
        return uniform_difference()
    if name == "bst-fringe":
        from .bst import bst_factor
        from .trees import BinaryTree

        return bst_factor(BinaryTree(params.get("tree", "100"))), SourceDistribution.uniform()
    if name == "gw-centered":
        from .gw import gw_centered_factor, gw_offspring_source
        from .trees import LinearSubtreeStatistic, OffspringDistribution, OrderedTree

        off = OffspringDistribution.parse(params.get("offspring", "poisson1"))
        stat = LinearSubtreeStatistic.single(OrderedTree.parse(params.get("tree", "0")))
        return gw_centered_factor(stat, off, table=False), gw_offspring_source(off, False)
    raise KeyError(name)


NAMES = ("rn-example", "difference", "bst-fringe", "gw-centered")
