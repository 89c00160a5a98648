"""Decomposable norms: evaluation, duals, proximal maps and subspace pairs.

Four regularizers are supported: the l1 norm, the weighted l1 norm, the
non-overlapping (1, alpha) group norm and the nuclear norm. Matrix parameters
are stored as flat vectors in row-major order; ``RegularizerSpec.shape`` gives
the matrix shape for the nuclear norm.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from mest.errors import DimensionError

__all__ = [
    "Kind",
    "RegularizerSpec",
    "SubspacePair",
    "Compatibility",
    "eval_norm",
    "dual_norm",
    "prox",
    "make_subspace_pair",
    "check_decomposability",
    "compatibility_constant",
    "project_l1_ball",
]

# singular values below this are treated as zero
SV_FLOOR = 1e-12


class Kind(str, enum.Enum):
    L1 = "l1"
    WEIGHTED_L1 = "weighted_l1"
    GROUP = "group"
    NUCLEAR = "nuclear"


@dataclass(frozen=True, eq=False)
class RegularizerSpec:
    """Which norm, plus its structural parameters.

    Use the ``l1``, ``weighted_l1``, ``group`` and ``nuclear`` constructors
    rather than building instances by hand; they validate the structure.
    """

    kind: Kind
    p: int
    weights: np.ndarray | None = None
    groups: tuple[np.ndarray, ...] | None = None
    alphas: tuple[float, ...] | None = None
    shape: tuple[int, int] | None = None

    @classmethod
    def l1(cls, p: int) -> "RegularizerSpec":
        if p < 1:
            raise ValueError(f"ambient dimension must be positive, got {p}")
        return cls(Kind.L1, int(p))

    @classmethod
    def weighted_l1(cls, weights: Sequence[float]) -> "RegularizerSpec":
        w = np.asarray(weights, dtype=float).copy()
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-d sequence")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError("all weights must be strictly positive and finite")
        w.setflags(write=False)
        return cls(Kind.WEIGHTED_L1, w.size, weights=w)

    @classmethod
    def group(
        cls,
        groups: Sequence[Sequence[int]],
        alpha: float | Sequence[float] = 2.0,
        p: int | None = None,
    ) -> "RegularizerSpec":
        """Group norm over a partition of ``range(p)`` (0-based indices).

        ``alpha`` is either one exponent for all groups or one per group;
        ``np.inf`` selects the block l1/l-infinity norm.
        """
        blocks = []
        for g in groups:
            idx = np.asarray(g, dtype=int).copy()
            if idx.ndim != 1 or idx.size == 0:
                raise ValueError("every group must be a non-empty list of indices")
            idx.setflags(write=False)
            blocks.append(idx)
        flat = np.concatenate(blocks)
        if p is None:
            p = int(flat.max()) + 1
        if flat.min() < 0 or flat.max() >= p:
            raise ValueError(f"group indices must lie in [0, {p})")
        if flat.size != p or np.unique(flat).size != p:
            raise ValueError("groups must form an exact disjoint cover of range(p)")
        if np.ndim(alpha) == 0:
            alphas = (float(alpha),) * len(blocks)
        else:
            alphas = tuple(float(a) for a in alpha)
            if len(alphas) != len(blocks):
                raise ValueError("need one exponent per group")
        if any(not a >= 2 for a in alphas):
            raise ValueError("group exponents must satisfy alpha >= 2")
        return cls(Kind.GROUP, int(p), groups=tuple(blocks), alphas=alphas)

    @classmethod
    def equal_groups(cls, n_groups: int, size: int, alpha: float = 2.0) -> "RegularizerSpec":
        """Contiguous groups ``[0..size), [size..2 size), ...``."""
        groups = [range(t * size, (t + 1) * size) for t in range(n_groups)]
        return cls.group(groups, alpha, p=n_groups * size)

    @classmethod
    def nuclear(cls, p1: int, p2: int) -> "RegularizerSpec":
        if p1 < 1 or p2 < 1:
            raise ValueError("matrix dimensions must be positive")
        return cls(Kind.NUCLEAR, int(p1) * int(p2), shape=(int(p1), int(p2)))

    @property
    def n_groups(self) -> int:
        return len(self.groups) if self.groups is not None else 0

    @property
    def max_group_size(self) -> int:
        return max(g.size for g in self.groups) if self.groups else 1

    def group_of(self) -> np.ndarray:
        """Array mapping each coordinate to its group index."""
        label = np.empty(self.p, dtype=int)
        for t, g in enumerate(self.groups):
            label[g] = t
        return label

    def check_dim(self, x: np.ndarray, name: str = "theta") -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind is Kind.NUCLEAR and x.ndim == 2:
            if x.shape != self.shape:
                raise DimensionError(name, self.shape, x.shape)
            return x.reshape(-1)
        if x.ndim != 1 or x.size != self.p:
            raise DimensionError(name, (self.p,), x.shape)
        return x

    def as_matrix(self, x: np.ndarray) -> np.ndarray:
        return self.check_dim(x).reshape(self.shape)


def _dual_exponent(alpha: float) -> float:
    if np.isinf(alpha):
        return 1.0
    return alpha / (alpha - 1.0)


def _lp(v: np.ndarray, q: float) -> float:
    if q == 1.0:
        return float(np.abs(v).sum())
    if q == 2.0:
        return float(np.sqrt(v @ v))
    if np.isinf(q):
        return float(np.abs(v).max())
    return float(np.linalg.norm(v, ord=q))


def _svals(reg: RegularizerSpec, x: np.ndarray) -> np.ndarray:
    return np.linalg.svd(x.reshape(reg.shape), compute_uv=False)


def eval_norm(reg: RegularizerSpec, theta) -> float:
    """R(theta)."""
    x = reg.check_dim(theta)
    if reg.kind is Kind.L1:
        return float(np.abs(x).sum())
    if reg.kind is Kind.WEIGHTED_L1:
        return float(reg.weights @ np.abs(x))
    if reg.kind is Kind.GROUP:
        return float(sum(_lp(x[g], a) for g, a in zip(reg.groups, reg.alphas)))
    return float(_svals(reg, x).sum())


def dual_norm(reg: RegularizerSpec, v) -> float:
    """R*(v) = sup over R(u) <= 1 of <u, v>."""
    x = reg.check_dim(v, "v")
    if reg.kind is Kind.L1:
        return float(np.abs(x).max())
    if reg.kind is Kind.WEIGHTED_L1:
        return float((np.abs(x) / reg.weights).max())
    if reg.kind is Kind.GROUP:
        return max(_lp(x[g], _dual_exponent(a)) for g, a in zip(reg.groups, reg.alphas))
    return float(_svals(reg, x)[0])


def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{x : ||x||_1 <= radius}`` by sorting."""
    v = np.asarray(v, dtype=float)
    if radius <= 0:
        return np.zeros_like(v)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    mu = np.sort(a)[::-1]
    cssv = np.cumsum(mu) - radius
    k = np.arange(1, a.size + 1)
    # >= keeps index 0 when the radius is below round-off of the largest entry
    rho = np.nonzero(mu * k >= cssv)[0][-1]
    shift = cssv[rho] / (rho + 1.0)
    return np.sign(v) * np.maximum(a - shift, 0.0)


def _soft(v: np.ndarray, t) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def prox(reg: RegularizerSpec, v, t: float) -> np.ndarray:
    """argmin_x  0.5 ||x - v||^2 + t R(x)."""
    if t < 0:
        raise ValueError(f"prox step must be nonnegative, got {t}")
    x = reg.check_dim(v, "v")
    if t == 0:
        return x.copy()
    if reg.kind is Kind.L1:
        return _soft(x, t)
    if reg.kind is Kind.WEIGHTED_L1:
        return _soft(x, t * reg.weights)
    if reg.kind is Kind.GROUP:
        out = np.empty_like(x)
        for g, a in zip(reg.groups, reg.alphas):
            vg = x[g]
            if a == 2.0:
                nrm = np.sqrt(vg @ vg)
                out[g] = 0.0 if nrm <= t else (1.0 - t / nrm) * vg
            elif np.isinf(a):
                # Moreau: prox of t||.||_inf is v minus projection onto the t-scaled l1 ball
                out[g] = vg - project_l1_ball(vg, t)
            else:
                raise NotImplementedError(f"prox for group exponent {a} is not available")
        return out
    u, s, vt = np.linalg.svd(x.reshape(reg.shape), full_matrices=False)
    s = np.maximum(s - t, 0.0)
    s[s < SV_FLOOR] = 0.0
    return ((u * s) @ vt).reshape(-1)


@dataclass(frozen=True, eq=False)
class SubspacePair:
    """Model subspace M, its enclosure M-bar and the projections onto each.

    For coordinate-structured norms M-bar equals M and the projections are
    coordinate masks. For the nuclear norm, ``pu``/``pv`` are the orthogonal
    projectors onto the column space U and row space V.
    """

    reg: RegularizerSpec
    mask: np.ndarray | None = None
    support: tuple[int, ...] = ()
    pu: np.ndarray | None = None
    pv: np.ndarray | None = None
    rank: int = 0
    bases: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @property
    def mbar_is_m(self) -> bool:
        return self.reg.kind is not Kind.NUCLEAR

    @property
    def dim_mbar(self) -> int:
        if self.mask is not None:
            return int(self.mask.sum())
        p1, p2 = self.reg.shape
        return p1 * p2 - (p1 - self.rank) * (p2 - self.rank)

    def proj_m(self, u) -> np.ndarray:
        x = self.reg.check_dim(u, "u")
        if self.mask is not None:
            return np.where(self.mask, x, 0.0)
        m = x.reshape(self.reg.shape)
        return (self.pu @ m @ self.pv).reshape(-1)

    def proj_m_perp(self, u) -> np.ndarray:
        x = self.reg.check_dim(u, "u")
        return x - self.proj_m(x)

    def proj_mbar_perp(self, u) -> np.ndarray:
        x = self.reg.check_dim(u, "u")
        if self.mask is not None:
            return np.where(self.mask, 0.0, x)
        m = x.reshape(self.reg.shape)
        m = m - self.pu @ m
        return (m - m @ self.pv).reshape(-1)

    def proj_mbar(self, u) -> np.ndarray:
        x = self.reg.check_dim(u, "u")
        return x - self.proj_mbar_perp(x)

    def random_in_m(self, rng: np.random.Generator) -> np.ndarray:
        return self.proj_m(rng.standard_normal(self.reg.p))

    def random_in_mbar(self, rng: np.random.Generator) -> np.ndarray:
        return self.proj_mbar(rng.standard_normal(self.reg.p))

    def random_in_mbar_perp(self, rng: np.random.Generator) -> np.ndarray:
        return self.proj_mbar_perp(rng.standard_normal(self.reg.p))


def _orthonormal(b: np.ndarray, rows: int, name: str) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    if b.shape[0] != rows:
        raise DimensionError(name, (rows, "r"), b.shape)
    gram = b.T @ b
    if not np.allclose(gram, np.eye(b.shape[1]), atol=1e-8):
        raise ValueError(f"basis {name} is not orthonormal")
    return b


def make_subspace_pair(reg: RegularizerSpec, structure) -> SubspacePair:
    """Build (M, M-bar) from a support set, a group-index set or bases (U, V).

    ``structure`` is a collection of coordinate indices for l1 and weighted l1,
    of group indices for the group norm, and a pair ``(U, V)`` of matrices
    with orthonormal columns for the nuclear norm. All indices are 0-based.
    """
    if reg.kind in (Kind.L1, Kind.WEIGHTED_L1):
        idx = np.asarray(sorted(set(int(i) for i in structure)), dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= reg.p):
            raise ValueError(f"support indices must lie in [0, {reg.p})")
        mask = np.zeros(reg.p, dtype=bool)
        mask[idx] = True
        mask.setflags(write=False)
        return SubspacePair(reg, mask=mask, support=tuple(idx.tolist()))
    if reg.kind is Kind.GROUP:
        idx = sorted(set(int(t) for t in structure))
        if idx and (idx[0] < 0 or idx[-1] >= reg.n_groups):
            raise ValueError(f"group indices must lie in [0, {reg.n_groups})")
        mask = np.zeros(reg.p, dtype=bool)
        for t in idx:
            mask[reg.groups[t]] = True
        mask.setflags(write=False)
        return SubspacePair(reg, mask=mask, support=tuple(idx))
    u, v = structure
    p1, p2 = reg.shape
    u = _orthonormal(u, p1, "U")
    v = _orthonormal(v, p2, "V")
    if u.shape[1] != v.shape[1]:
        raise ValueError("U and V must have the same number of columns")
    return SubspacePair(reg, pu=u @ u.T, pv=v @ v.T, rank=u.shape[1], bases=(u, v))


def check_decomposability(reg: RegularizerSpec, pair: SubspacePair, theta, gamma) -> float:
    """|R(theta + gamma) - R(theta) - R(gamma)| after projecting theta onto M
    and gamma onto the perturbation subspace."""
    th = pair.proj_m(theta)
    ga = pair.proj_mbar_perp(gamma)
    return abs(eval_norm(reg, th + ga) - eval_norm(reg, th) - eval_norm(reg, ga))


@dataclass(frozen=True)
class Compatibility:
    value: float
    analytic: bool
    samples: int = 0

    def __float__(self) -> float:
        return self.value


def compatibility_constant(
    reg: RegularizerSpec,
    pair: SubspacePair,
    error_norm: str = "l2",
    monte_carlo: bool = False,
    samples: int = 10_000,
    seed: int = 0,
) -> Compatibility:
    """sup over nonzero u in M-bar of R(u) / ||u||_2.

    Closed forms are used for all four norms unless ``monte_carlo`` is set, in
    which case the supremum is estimated from ``samples`` random directions in
    M-bar; that estimate is a lower bound on the true value.
    """
    if error_norm not in ("l2", "frobenius"):
        raise ValueError(f"unsupported error norm {error_norm!r}")
    if pair.dim_mbar == 0:
        raise ValueError("compatibility constant is undefined on the zero subspace")
    if monte_carlo:
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((samples, reg.p))
        best = 0.0
        for row in z:
            u = pair.proj_mbar(row)
            nrm = np.linalg.norm(u)
            if nrm > 0:
                best = max(best, eval_norm(reg, u) / nrm)
        return Compatibility(best, analytic=False, samples=samples)
    if reg.kind is Kind.L1:
        value = np.sqrt(len(pair.support))
    elif reg.kind is Kind.WEIGHTED_L1:
        value = float(np.linalg.norm(reg.weights[pair.mask]))
    elif reg.kind is Kind.GROUP:
        # alpha >= 2 gives ||u_G||_alpha <= ||u_G||_2, tight on 1-sparse blocks
        value = np.sqrt(len(pair.support))
    else:
        p1, p2 = reg.shape
        value = np.sqrt(min(2 * pair.rank, p1, p2))
    return Compatibility(float(value), analytic=True)
