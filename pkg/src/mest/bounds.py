"""Closed-form error bounds for regularized M-estimators.

These are plain formula evaluators. Probability qualifiers attached to the
bounds involve unspecified universal constants, so they are carried only as
the ``regime`` tag of a :class:`BoundReport`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BoundReport",
    "theorem1_bound",
    "corollary1_bounds",
    "lasso_hard_bound",
    "lasso_weak_bound",
    "weak_regime_ok",
    "group_bound",
    "best_group_subset",
    "brute_force_group_subset",
]


@dataclass
class BoundReport:
    bound_err_sq: float
    bound_reg: float | None = None
    inputs: dict = field(default_factory=dict)
    regime: str = ""
    in_regime: bool = True


def _positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")


def theorem1_bound(lam: float, kappa: float, psi: float, tau_sq: float = 0.0, approx: float = 0.0) -> float:
    """9 lam^2 psi^2 / kappa^2 + (lam / kappa) (2 tau^2 + 4 approx).

    ``approx`` is R(Pi_{M-perp}(theta*)); the result bounds the squared error norm.
    """
    _positive("kappa", kappa)
    _positive("lam", lam)
    if psi < 0 or tau_sq < 0 or approx < 0:
        raise ValueError("psi, tau^2 and the approximation term must be nonnegative")
    return 9.0 * lam**2 * psi**2 / kappa**2 + (lam / kappa) * (2.0 * tau_sq + 4.0 * approx)


def corollary1_bounds(lam: float, kappa: float, psi: float) -> tuple[float, float]:
    """(9 lam^2 psi^2 / kappa, 12 lam psi^2 / kappa) for theta* inside M.

    Note the first term divides by kappa, not kappa^2 as in ``theorem1_bound``;
    both are kept exactly as stated in the source.
    """
    _positive("kappa", kappa)
    _positive("lam", lam)
    return 9.0 * lam**2 * psi**2 / kappa, 12.0 * lam * psi**2 / kappa


def lasso_hard_bound(sigma: float, kappa: float, s: int, p: int, n: int) -> tuple[float, float]:
    """Squared-l2 and l1 error bounds for the Lasso on an s-sparse target."""
    _positive("kappa", kappa)
    if n < 2 or p < 2 or s < 1:
        raise ValueError("need n, p >= 2 and s >= 1")
    rate = np.log(p) / n
    return 64.0 * sigma**2 / kappa**2 * s * rate, 24.0 * sigma / kappa * s * np.sqrt(rate)


def weak_regime_ok(radius: float, q: float, p: int, n: int) -> bool:
    """sqrt(R_q) (log p / n)^(1/2 - q/4) <= 1."""
    return bool(np.sqrt(radius) * (np.log(p) / n) ** (0.5 - q / 4.0) <= 1.0)


def lasso_weak_bound(
    sigma: float, kappa1: float, radius: float, q: float, p: int, n: int, c0: float = 64.0
) -> BoundReport:
    """c0 R_q (sigma^2 / kappa1^2 * log p / n)^(1 - q/2) for targets in an lq ball.

    The universal constant c0 has no published value; the default 64 makes
    q = 0 coincide with the exact-sparsity bound.
    """
    _positive("kappa1", kappa1)
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    value = c0 * radius * (sigma**2 / kappa1**2 * np.log(p) / n) ** (1.0 - q / 2.0)
    ok = weak_regime_ok(radius, q, p, n)
    return BoundReport(
        float(value),
        inputs=dict(sigma=sigma, kappa1=kappa1, radius=radius, q=q, p=p, n=n, c0=c0),
        regime="lq_ball" if ok else "lq_ball:out_of_regime",
        in_regime=ok,
    )


def group_bound(lam: float, kappa: float, s_groups: int, tail: float = 0.0) -> float:
    """4 lam^2 s_G / kappa^2 + 4 lam tail / kappa, tail = sum of ||theta*_G||_alpha off S_G."""
    _positive("kappa", kappa)
    if lam < 0 or s_groups < 0 or tail < 0:
        raise ValueError("inputs must be nonnegative")
    return 4.0 * lam**2 * s_groups / kappa**2 + 4.0 * lam * tail / kappa


def best_group_subset(lam: float, kappa: float, group_norms) -> tuple[float, tuple[int, ...]]:
    """Minimize ``group_bound`` over S_G by sweeping prefixes of the groups
    sorted by decreasing norm; returns (bound, chosen group indices)."""
    norms = np.asarray(group_norms, dtype=float)
    order = np.argsort(-norms, kind="stable")
    total = norms.sum()
    best, best_k = np.inf, 0
    kept = 0.0
    for k in range(norms.size + 1):
        if k:
            kept += norms[order[k - 1]]
        b = group_bound(lam, kappa, k, max(total - kept, 0.0))
        if b < best:
            best, best_k = b, k
    return float(best), tuple(sorted(int(t) for t in order[:best_k]))


def brute_force_group_subset(lam: float, kappa: float, group_norms) -> tuple[float, tuple[int, ...]]:
    """Exhaustive minimum over all 2^N_G subsets (small N_G only)."""
    norms = np.asarray(group_norms, dtype=float)
    best, best_set = np.inf, ()
    for k in range(norms.size + 1):
        for subset in itertools.combinations(range(norms.size), k):
            tail = norms.sum() - norms[list(subset)].sum()
            b = group_bound(lam, kappa, k, max(tail, 0.0))
            if b < best - 1e-15:
                best, best_set = b, subset
    return float(best), tuple(best_set)
