"""Spectral statistics of chiral random matrix ensembles.

Finite-N and hard-edge results for the chiral GUE with mass insertions,
its Wilson and chemical-potential extensions, and Monte Carlo samplers to
check them against.
"""
__version__ = "0.1.0"
