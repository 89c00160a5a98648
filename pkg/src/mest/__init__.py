"""Regularized M-estimation with decomposable norms: solvers, certificates and error bounds."""

__version__ = "0.1.0"
