"""Accelerated proximal gradient for  min_theta L(theta) + lam * R(theta)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mest.errors import DimensionError
from mest.losses import LossKind, LossModel, log1pexp, sigmoid
from mest.regularizers import RegularizerSpec, eval_norm, prox

__all__ = ["SolverConfig", "SolverResult", "objective", "solve", "fixed_point_residual"]


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 5000
    tol: float = 1e-9
    step: float = 1.0
    backtrack: float = 0.5
    accelerate: bool = True
    # stationarity tolerance, relative to 1 + ||theta||
    fp_tol: float = 1e-7

    def __post_init__(self):
        if self.max_iters < 1 or not self.tol > 0 or not self.step > 0 or not self.fp_tol > 0:
            raise ValueError("solver settings must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")


@dataclass
class SolverResult:
    theta: np.ndarray
    delta: np.ndarray | None
    trace: list[float] = field(repr=False)
    converged: bool
    iterations: int
    step: float
    fp_residual: float


class _Smooth:
    """Loss evaluations that reuse the design's products across iterations."""

    def __init__(self, model: LossModel, X, y):
        self.model = model
        self.X = X
        self.y = y
        self.n = X.shape[0]
        self.c = self.n * model.scale

    def value(self, theta, z=None):
        z = self.X @ theta if z is None else z
        if self.model.kind is LossKind.LEAST_SQUARES:
            r = self.y - z
            return float(r @ r) / (2.0 * self.c), z
        return float(np.sum(log1pexp(z) - self.y * z)) / self.c, z

    def grad(self, z):
        if self.model.kind is LossKind.LEAST_SQUARES:
            return self.X.T @ (z - self.y) / self.c
        return self.X.T @ (sigmoid(z) - self.y) / self.c


def _validate(reg: RegularizerSpec, data):
    X, y = data
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise DimensionError("X", ("n", "p"), X.shape)
    if y.shape != (X.shape[0],):
        raise DimensionError("y", (X.shape[0],), y.shape)
    if X.shape[1] != reg.p:
        raise DimensionError("X", (X.shape[0], reg.p), X.shape)
    return X, y


def objective(loss: LossModel, reg: RegularizerSpec, data, lam: float, theta) -> float:
    """L(theta) + lam R(theta)."""
    from mest.losses import loss_value

    X, y = _validate(reg, data)
    theta = reg.check_dim(theta)
    return loss_value(loss, theta, (X, y)) + lam * eval_norm(reg, theta)


def fixed_point_residual(loss, reg, data, lam, theta, step) -> float:
    """||theta - prox(theta - step * grad, step * lam)||."""
    X, y = _validate(reg, data)
    f = _Smooth(loss, X, y)
    g = f.grad(X @ theta)
    return float(np.linalg.norm(theta - prox(reg, theta - step * g, step * lam)))


def solve(
    loss: LossModel,
    reg: RegularizerSpec,
    data,
    lam: float,
    cfg: SolverConfig = SolverConfig(),
    theta_star=None,
    theta0=None,
) -> SolverResult:
    """Monotone FISTA with backtracking on the quadratic upper bound.

    Momentum is reset whenever a proximal step fails to decrease the
    objective, so the recorded trace never increases. Convergence requires
    both a relative objective change below ``cfg.tol`` and a fixed-point
    residual below ``cfg.fp_tol * (1 + ||theta||)``. Running out of
    iterations is reported through ``converged`` and never raises.
    """
    if not lam > 0:
        raise ValueError(f"regularization weight must be positive, got {lam}")
    X, y = _validate(reg, data)
    f = _Smooth(loss, X, y)
    p = reg.p
    x = np.zeros(p) if theta0 is None else reg.check_dim(theta0).copy()
    fx, zx = f.value(x)
    Fx = fx + lam * eval_norm(reg, x)
    trace = [Fx]
    ypt, zy, fy = x.copy(), zx, fx
    t = 1.0
    L = 1.0 / cfg.step
    converged = False
    fp = np.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        gy = f.grad(zy)
        while True:
            eta = 1.0 / L
            cand = prox(reg, ypt - eta * gy, eta * lam)
            d = cand - ypt
            fc, zc = f.value(cand)
            if fc <= fy + gy @ d + 0.5 * L * (d @ d) + 1e-12 * abs(fy):
                break
            L /= cfg.backtrack
        Fc = fc + lam * eval_norm(reg, cand)
        # fixed-point residual at the extrapolated point, scaled to a gradient-map norm
        fp = float(np.linalg.norm(d))
        if Fc <= Fx:
            x_new, z_new, F_new = cand, zc, Fc
            restart = False
        else:
            x_new, z_new, F_new = x, zx, Fx
            restart = True
        rel = abs(Fx - F_new) / max(1.0, abs(Fx))
        if cfg.accelerate and not restart:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            ypt = x_new + (t / t_new) * (cand - x_new) + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        else:
            ypt = x_new.copy()
            t = 1.0
        x_prev = x
        x, zx, Fx = x_new, z_new, F_new
        trace.append(Fx)
        if cfg.accelerate and not restart:
            zy = X @ ypt
            fy = f.value(ypt, zy)[0]
        else:
            zy, fy = zx, f.value(x, zx)[0]
        # allow the step to grow again slowly
        L *= 0.95
        if rel <= cfg.tol and not restart and np.linalg.norm(x - x_prev) <= cfg.fp_tol * (1.0 + np.linalg.norm(x)):
            res = fixed_point_residual(loss, reg, (X, y), lam, x, 1.0 / L)
            fp = res
            if res <= cfg.fp_tol * (1.0 + np.linalg.norm(x)):
                converged = True
                break
    delta = None if theta_star is None else x - np.asarray(theta_star, dtype=float)
    return SolverResult(x, delta, trace, converged, it, 1.0 / L, fp)
