"""Degeneracy analysis for m-dependent block factors and fringe-subtree counts."""

__version__ = "0.1.0"
