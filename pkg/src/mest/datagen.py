"""Synthetic regression instances: Gaussian designs, targets, noise, normalization."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mest.errors import DimensionError
from mest.losses import sigmoid

__all__ = [
    "Covariance",
    "TargetKind",
    "TargetSpec",
    "ProblemInstance",
    "child_rng",
    "sample_design",
    "column_normalize",
    "block_normalize",
    "block_operator_norms",
    "make_target",
    "sample_noise",
    "synthesize",
    "make_instance",
    "save_instance",
    "load_instance",
]


def child_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a (master seed, key...) pair."""
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True)
class Covariance:
    """Design covariance: identity, Toeplitz rho^|i-j|, or an explicit matrix."""

    kind: str = "identity"
    rho: float = 0.0
    matrix: np.ndarray | None = field(default=None, repr=False)

    def dense(self, p: int) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(p)
        if self.kind == "toeplitz":
            idx = np.arange(p)
            return self.rho ** np.abs(idx[:, None] - idx[None, :])
        if self.kind == "explicit":
            m = np.asarray(self.matrix, dtype=float)
            if m.shape != (p, p):
                raise DimensionError("Sigma", (p, p), m.shape)
            return m
        raise ValueError(f"unknown covariance kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "toeplitz":
            return f"toeplitz({self.rho})"
        return self.kind


def sample_design(sigma: Covariance, n: int, p: int, seed) -> np.ndarray:
    """n rows drawn i.i.d. from N(0, Sigma)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((n, p))
    if sigma.kind == "identity":
        return z
    try:
        chol = np.linalg.cholesky(sigma.dense(p))
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance matrix is not positive definite") from exc
    return z @ chol.T


def column_normalize(X) -> np.ndarray:
    """Rescale columns so that max_j ||X_j||_2 / sqrt(n) = 1 for every column."""
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=0) / np.sqrt(X.shape[0])
    if np.any(norms == 0):
        raise ValueError(f"design has zero columns: {np.flatnonzero(norms == 0).tolist()}")
    return X / norms


def _inf_to_2(block: np.ndarray, exact_limit: int = 20) -> tuple[float, bool]:
    """max over ||b||_inf <= 1 of ||block @ b||_2; exact below ``exact_limit`` columns."""
    m = block.shape[1]
    if m > exact_limit:
        return float(np.sqrt(m) * np.linalg.norm(block, axis=0).max()), False
    gram = block.T @ block
    best = 0.0
    # convex objective: the maximum sits on a vertex; fix the first sign by symmetry
    for signs in itertools.product((1.0, -1.0), repeat=m - 1):
        s = np.array((1.0,) + signs)
        best = max(best, float(s @ gram @ s))
    return float(np.sqrt(best)), True


def _power_iteration(block: np.ndarray, iters: int = 500, tol: float = 1e-14) -> float:
    gram = block.T @ block
    v = np.ones(gram.shape[0]) / np.sqrt(gram.shape[0])
    v += 1e-3 * np.arange(gram.shape[0])  # break symmetric starts
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = gram @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        new = float(v @ gram @ v)
        if abs(new - lam) <= tol * max(1.0, new):
            lam = new
            break
        lam = new
    return float(np.sqrt(lam))


def block_operator_norms(X, groups, alpha: float, exact_limit: int = 20):
    """||X_G||_{alpha -> 2} for each group, plus a flag per group telling
    whether the value is exact (False means an upper bound).

    Only alpha = 2 and alpha = inf are supported.
    """
    X = np.asarray(X, dtype=float)
    values, exact = [], []
    for g in groups:
        block = X[:, np.asarray(g)]
        if alpha == 2:
            values.append(_power_iteration(block))
            exact.append(True)
        elif np.isinf(alpha):
            v, ok = _inf_to_2(block, exact_limit)
            values.append(v)
            exact.append(ok)
        else:
            raise NotImplementedError(f"block operator norm for alpha={alpha}")
    return np.array(values), np.array(exact)


def block_normalize(X, groups, alpha: float = 2.0) -> np.ndarray:
    """Rescale each block so that ||X_G||_{alpha -> 2} / sqrt(n) = 1."""
    X = np.asarray(X, dtype=float).copy()
    norms, _ = block_operator_norms(X, groups, alpha)
    norms = norms / np.sqrt(X.shape[0])
    if np.any(norms == 0):
        raise ValueError("design has an all-zero block")
    for g, v in zip(groups, norms):
        X[:, np.asarray(g)] /= v
    return X


class TargetKind(str, enum.Enum):
    EXACT_SPARSE = "exact_sparse"
    LQ_BALL = "lq_ball"
    GROUP_SPARSE = "group_sparse"
    LOW_RANK = "low_rank"


@dataclass(frozen=True)
class TargetSpec:
    """What the true parameter looks like.

    ``magnitude`` scales nonzero entries for exact and group sparsity;
    ``signs`` randomizes their signs. ``profile`` sets the entries inside an
    active group: "sign" draws +-magnitude, "gaussian" draws
    magnitude * N(0, 1).
    """

    kind: TargetKind
    s: int = 0
    q: float = 1.0
    radius: float = 1.0
    s_groups: int = 0
    rank: int = 0
    magnitude: float = 1.0
    signs: bool = True
    profile: str = "sign"

    def __post_init__(self):
        if self.profile not in ("sign", "gaussian"):
            raise ValueError(f"unknown group profile {self.profile!r}")

    @classmethod
    def exact_sparse(cls, s: int, magnitude: float = 1.0, signs: bool = True):
        return cls(TargetKind.EXACT_SPARSE, s=s, magnitude=magnitude, signs=signs)

    @classmethod
    def lq_ball(cls, q: float, radius: float):
        return cls(TargetKind.LQ_BALL, q=q, radius=radius)

    @classmethod
    def group_sparse(cls, s_groups: int, magnitude: float = 1.0, profile: str = "sign"):
        return cls(TargetKind.GROUP_SPARSE, s_groups=s_groups, magnitude=magnitude, profile=profile)

    @classmethod
    def low_rank(cls, rank: int):
        return cls(TargetKind.LOW_RANK, rank=rank)

    def describe(self) -> str:
        k = self.kind
        if k is TargetKind.EXACT_SPARSE:
            return f"exact_sparse(s={self.s})"
        if k is TargetKind.LQ_BALL:
            return f"lq_ball(q={self.q},R={self.radius})"
        if k is TargetKind.GROUP_SPARSE:
            return f"group_sparse(sG={self.s_groups},{self.profile})"
        return f"low_rank(r={self.rank})"


def make_target(spec: TargetSpec, dims, seed, groups=None) -> np.ndarray:
    """Draw theta*.

    ``dims`` is p for vector targets and (p1, p2) for low-rank targets, whose
    result is flattened row-major. Group-sparse targets need ``groups``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    k = spec.kind
    if k is TargetKind.LOW_RANK:
        p1, p2 = dims
        if not 1 <= spec.rank <= min(p1, p2):
            raise ValueError(f"rank {spec.rank} infeasible for a {p1}x{p2} matrix")
        a = rng.standard_normal((p1, spec.rank))
        b = rng.standard_normal((p2, spec.rank))
        return (a @ b.T).reshape(-1)
    p = int(dims)
    theta = np.zeros(p)
    if k is TargetKind.EXACT_SPARSE:
        if not 0 <= spec.s <= p:
            raise ValueError(f"sparsity {spec.s} infeasible for p={p}")
        support = rng.choice(p, size=spec.s, replace=False)
        signs = rng.choice((-1.0, 1.0), size=spec.s) if spec.signs else np.ones(spec.s)
        theta[support] = spec.magnitude * signs
        return theta
    if k is TargetKind.LQ_BALL:
        q, R = spec.q, spec.radius
        if not 0 <= q <= 1 or not R > 0:
            raise ValueError("lq-ball targets need q in [0, 1] and a positive radius")
        if q == 0:
            if R != int(R) or R > p:
                raise ValueError("q = 0 needs an integer radius no larger than p")
            return make_target(TargetSpec.exact_sparse(int(R)), p, rng)
        j = np.arange(1, p + 1, dtype=float)
        decay = j ** (-1.0 / q)
        # c^q * sum decay^q = R
        c = (R / np.sum(decay**q)) ** (1.0 / q)
        perm = rng.permutation(p)
        theta[perm] = c * decay * rng.choice((-1.0, 1.0), size=p)
        return theta
    if groups is None:
        raise ValueError("group-sparse targets need the group partition")
    if not 0 <= spec.s_groups <= len(groups):
        raise ValueError(f"{spec.s_groups} active groups infeasible for {len(groups)} groups")
    active = rng.choice(len(groups), size=spec.s_groups, replace=False)
    for t in active:
        g = np.asarray(groups[t])
        if spec.profile == "gaussian":
            theta[g] = spec.magnitude * rng.standard_normal(g.size)
        else:
            theta[g] = spec.magnitude * rng.choice((-1.0, 1.0), size=g.size)
    return theta


def sample_noise(kind: str, sigma: float, n: int, seed) -> np.ndarray:
    """Gaussian N(0, sigma^2) or Rademacher +-sigma noise; both are sigma-sub-Gaussian."""
    if sigma < 0:
        raise ValueError("noise scale must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if kind == "gaussian":
        return sigma * rng.standard_normal(n)
    if kind == "rademacher":
        return sigma * rng.choice((-1.0, 1.0), size=n)
    raise ValueError(f"unknown noise kind {kind!r}")


def synthesize(X, theta_star, noise=None, logistic: bool = False, seed=None) -> np.ndarray:
    """Responses y = X theta* + w, or Bernoulli(sigmoid(<x_i, theta*>)) draws."""
    X = np.asarray(X, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    if X.shape[1] != theta_star.size:
        raise DimensionError("theta_star", (X.shape[1],), theta_star.shape)
    z = X @ theta_star
    if logistic:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return (rng.random(X.shape[0]) < sigmoid(z)).astype(float)
    if noise is None:
        return z
    noise = np.asarray(noise, dtype=float)
    if noise.shape != z.shape:
        raise DimensionError("noise", z.shape, noise.shape)
    return z + noise


@dataclass(eq=False)
class ProblemInstance:
    X: np.ndarray
    y: np.ndarray
    theta_star: np.ndarray
    sigma: float
    seed: int
    loss: str = "least_squares"
    covariance: str = "identity"
    target: str = ""
    noise: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def data(self):
        return self.X, self.y


def make_instance(
    n: int,
    p: int,
    target: TargetSpec,
    sigma: float,
    seed: int,
    covariance: Covariance = Covariance(),
    logistic: bool = False,
    groups=None,
    normalize: str | None = "columns",
    noise_kind: str = "gaussian",
) -> ProblemInstance:
    """Design, target and response from one seed.

    ``normalize`` is "columns" (column normalization), "blocks" (block
    normalization over ``groups`` with alpha = 2) or None.
    """
    rng = np.random.default_rng(seed)
    X = sample_design(covariance, n, p, rng)
    if normalize == "columns":
        X = column_normalize(X)
    elif normalize == "blocks":
        X = block_normalize(X, groups, 2.0)
    theta = make_target(target, p, rng, groups=groups)
    if logistic:
        y = synthesize(X, theta, logistic=True, seed=rng)
        w = None
    else:
        w = sample_noise(noise_kind, sigma, n, rng)
        y = synthesize(X, theta, w)
    return ProblemInstance(
        X, y, theta, sigma, int(seed),
        loss="logistic" if logistic else "least_squares",
        covariance=covariance.describe(),
        target=target.describe(),
        noise=w,
    )


# On-disk format: "# key = value" header lines, a blank line, then n rows of
# "x_i1 ... x_ip y_i" and one final row holding theta*. Floats use repr so a
# save/load round trip is exact.
def save_instance(inst: ProblemInstance, path) -> Path:
    path = Path(path)
    header = {
        "format": "mest-instance-1",
        "n": inst.n,
        "p": inst.p,
        "sigma": repr(float(inst.sigma)),
        "seed": inst.seed,
        "loss": inst.loss,
        "covariance": inst.covariance,
        "target": inst.target,
    }
    lines = [f"# {k} = {v}" for k, v in header.items()]
    lines.append("")
    for row, yi in zip(inst.X, inst.y):
        lines.append(" ".join(repr(float(v)) for v in row) + " " + repr(float(yi)))
    lines.append(" ".join(repr(float(v)) for v in inst.theta_star))
    path.write_text("\n".join(lines) + "\n")
    return path


def load_instance(path) -> ProblemInstance:
    text = Path(path).read_text().splitlines()
    header = {}
    body_start = 0
    for i, line in enumerate(text):
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
        elif not line.strip():
            body_start = i + 1
            break
    n, p = int(header["n"]), int(header["p"])
    rows = [np.array(line.split(), dtype=float) for line in text[body_start:] if line.strip()]
    if len(rows) != n + 1:
        raise ValueError(f"{path}: expected {n + 1} payload rows, found {len(rows)}")
    body = np.vstack(rows[:n])
    if body.shape != (n, p + 1) or rows[n].shape != (p,):
        raise ValueError(f"{path}: payload does not match header dimensions n={n}, p={p}")
    return ProblemInstance(
        body[:, :p], body[:, p], rows[n], float(header["sigma"]), int(header["seed"]),
        loss=header.get("loss", "least_squares"),
        covariance=header.get("covariance", "identity"),
        target=header.get("target", ""),
    )
