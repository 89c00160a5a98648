"""Least-squares and logistic losses with gradients and the first-order
Taylor remainder used by restricted strong convexity."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from mest.errors import DimensionError

__all__ = [
    "LossKind",
    "LossModel",
    "LEAST_SQUARES",
    "LOGISTIC",
    "log1pexp",
    "sigmoid",
    "loss_value",
    "loss_gradient",
    "taylor_error",
]


class LossKind(str, enum.Enum):
    LEAST_SQUARES = "least_squares"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class LossModel:
    """Loss family with its scale c(sigma).

    The least-squares link is t^2 / 2; the logistic link is log(1 + e^t).
    Both losses are divided by ``scale``; the defaults give the usual
    (1/2n)||y - X theta||^2 and the logistic negative log-likelihood.
    """

    kind: LossKind = LossKind.LEAST_SQUARES
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"loss scale must be positive, got {self.scale}")

    def link(self, t):
        if self.kind is LossKind.LEAST_SQUARES:
            return 0.5 * np.square(t)
        return log1pexp(t)

    def link_prime(self, t):
        if self.kind is LossKind.LEAST_SQUARES:
            return np.asarray(t, dtype=float)
        return sigmoid(t)


LEAST_SQUARES = LossModel(LossKind.LEAST_SQUARES)
LOGISTIC = LossModel(LossKind.LOGISTIC)


def log1pexp(t):
    """log(1 + exp(t)), written so that large |t| neither overflows nor loses digits."""
    t = np.asarray(t, dtype=float)
    return np.where(t > 30, t + np.log1p(np.exp(-np.abs(t))), np.log1p(np.exp(np.minimum(t, 30))))


def sigmoid(t):
    t = np.asarray(t, dtype=float)
    e = np.exp(-np.abs(t))
    return np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _check(model: LossModel, theta, data):
    X, y = data
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if X.ndim != 2:
        raise DimensionError("X", ("n", "p"), X.shape)
    n, p = X.shape
    if y.shape != (n,):
        raise DimensionError("y", (n,), y.shape)
    if theta.shape != (p,):
        raise DimensionError("theta", (p,), theta.shape)
    if model.kind is LossKind.LOGISTIC and not np.all((y == 0) | (y == 1)):
        raise ValueError("logistic loss requires binary responses in {0, 1}")
    return X, y, theta


def loss_value(model: LossModel, theta, data) -> float:
    X, y, theta = _check(model, theta, data)
    n = X.shape[0]
    z = X @ theta
    if model.kind is LossKind.LEAST_SQUARES:
        r = y - z
        return float(r @ r) / (2.0 * n * model.scale)
    return float(np.sum(log1pexp(z) - y * z)) / (n * model.scale)


def loss_gradient(model: LossModel, theta, data) -> np.ndarray:
    X, y, theta = _check(model, theta, data)
    n = X.shape[0]
    z = X @ theta
    if model.kind is LossKind.LEAST_SQUARES:
        return X.T @ (z - y) / (n * model.scale)
    return X.T @ (sigmoid(z) - y) / (n * model.scale)


def taylor_error(model: LossModel, theta_star, delta, data) -> float:
    """L(theta* + delta) - L(theta*) - <grad L(theta*), delta>.

    For least squares this is (1/2n)||X delta||^2, computed in that form to
    avoid cancellation. The logistic remainder is evaluated per sample as
    Phi(z + d) - Phi(z) - Phi'(z) d, which is nonnegative term by term.
    """
    X, y, theta_star = _check(model, theta_star, data)
    delta = np.asarray(delta, dtype=float)
    if delta.shape != theta_star.shape:
        raise DimensionError("delta", theta_star.shape, delta.shape)
    n = X.shape[0]
    d = X @ delta
    if model.kind is LossKind.LEAST_SQUARES:
        return float(d @ d) / (2.0 * n * model.scale)
    z = X @ theta_star
    terms = log1pexp(z + d) - log1pexp(z) - sigmoid(z) * d
    return float(np.sum(np.maximum(terms, 0.0))) / (n * model.scale)
