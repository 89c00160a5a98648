"""Empirical checks of the conditions behind the error bounds.

Restricted eigenvalue and restricted strong convexity constants are fitted
over finite, seeded probe sets. A positive result is a certificate over those
probes only, never a proof for the whole cone.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from mest.losses import LossModel, loss_gradient, taylor_error
from mest.regularizers import Kind, RegularizerSpec, SubspacePair, dual_norm, eval_norm

__all__ = [
    "KAPPA2_GRID",
    "ConeCheck",
    "REReport",
    "RSCReport",
    "ThresholdReport",
    "TailReport",
    "CertificateReport",
    "lambda_from_gradient",
    "lambda_rule_lasso",
    "lambda_rule_group",
    "cone_membership",
    "deviation_gap",
    "sample_cone",
    "estimate_re_constants",
    "rho_group",
    "verify_rsc",
    "weak_sparsity_threshold",
    "group_tail_check",
    "certify_instance",
]

KAPPA2_GRID = np.concatenate([[0.0], np.logspace(-3, 3, 61)])


def lambda_from_gradient(loss: LossModel, reg: RegularizerSpec, data, theta_star) -> float:
    """2 R*(grad L(theta*)), the smallest weight the cone guarantee allows."""
    return 2.0 * dual_norm(reg, loss_gradient(loss, theta_star, data))


def lambda_rule_lasso(sigma: float, n: int, p: int) -> float:
    """4 sigma sqrt(log p / n)."""
    return 4.0 * sigma * np.sqrt(np.log(p) / n)


def lambda_rule_group(sigma: float, n: int, m: int, alpha: float, n_groups: int) -> float:
    """2 sigma (m^(1 - 1/alpha) / sqrt(n) + sqrt(log N_G / n))."""
    expo = 1.0 if np.isinf(alpha) else 1.0 - 1.0 / alpha
    return 2.0 * sigma * (m**expo / np.sqrt(n) + np.sqrt(np.log(n_groups) / n))


@dataclass(frozen=True)
class ConeCheck:
    member: bool
    slack: float
    lhs: float
    rhs: float

    def __bool__(self) -> bool:
        return self.member


# relative slack for round-off in the membership comparison
CONE_RTOL = 1e-12


def cone_membership(delta, reg: RegularizerSpec, pair: SubspacePair, theta_star) -> ConeCheck:
    """Is R(Pi_{Mbar-perp} delta) <= 3 R(Pi_{Mbar} delta) + 4 R(Pi_{M-perp} theta*)?

    ``slack`` is rhs - lhs; members have slack >= 0 up to round-off.
    """
    lhs = eval_norm(reg, pair.proj_mbar_perp(delta))
    rhs = 3.0 * eval_norm(reg, pair.proj_mbar(delta)) + 4.0 * eval_norm(reg, pair.proj_m_perp(theta_star))
    member = lhs <= rhs + CONE_RTOL * (lhs + rhs)
    return ConeCheck(bool(member), rhs - lhs, lhs, rhs)


def deviation_gap(reg: RegularizerSpec, pair: SubspacePair, theta_star, delta) -> float:
    """[R(theta* + delta) - R(theta*)] - [R(Pi_{Mbar-perp} delta) - R(Pi_{Mbar} delta)
    - 2 R(Pi_{M-perp} theta*)]; nonnegative for decomposable norms."""
    theta_star = np.asarray(theta_star, dtype=float)
    delta = np.asarray(delta, dtype=float)
    lhs = eval_norm(reg, theta_star + delta) - eval_norm(reg, theta_star)
    rhs = (
        eval_norm(reg, pair.proj_mbar_perp(delta))
        - eval_norm(reg, pair.proj_mbar(delta))
        - 2.0 * eval_norm(reg, pair.proj_m_perp(theta_star))
    )
    return lhs - rhs


def sample_cone(
    reg: RegularizerSpec,
    pair: SubspacePair,
    theta_star,
    count: int,
    rng: np.random.Generator,
    radius: float | None = 1.0,
) -> np.ndarray:
    """Random members of the cone set, optionally intersected with a ball.

    Each probe is a + b with a in M-bar and b in the perturbation subspace,
    scaled so R(b) = u (3 R(a) + 4 R(Pi_{M-perp} theta*)). Half the probes
    use u = 1 (the boundary), the rest u ~ U(0, 1). When theta* is off the
    model subspace, one probe in five has a = 0 so the ball around the origin
    that the set contains is explored too. Probes longer than ``radius`` are
    shrunk toward zero, which keeps them in the set because it is star-shaped.
    """
    approx = eval_norm(reg, pair.proj_m_perp(theta_star))
    out = np.empty((count, reg.p))
    for i in range(count):
        u = 1.0 if rng.random() < 0.5 else rng.random()
        a = pair.random_in_mbar(rng)
        if approx > 0 and rng.random() < 0.2:
            a[:] = 0.0
        elif radius is not None:
            na = np.linalg.norm(a)
            if na > 0:
                a *= radius * rng.random() / na
        b = pair.random_in_mbar_perp(rng)
        rb = eval_norm(reg, b)
        target = u * (3.0 * eval_norm(reg, a) + 4.0 * approx)
        b = b * (target / rb) if rb > 0 else b
        d = a + b
        if radius is not None:
            nd = np.linalg.norm(d)
            if approx == 0 and nd > 0:
                # a cone: any positive rescaling stays inside
                d *= radius * (0.05 + 0.95 * rng.random()) / nd
            elif nd > radius:
                d *= radius / nd
        out[i] = d
    return out


@dataclass
class REReport:
    """Fitted two-term lower bound  ||X d||^2 / n >= k1 ||d||^2 - k2 g R(d)^2."""

    kappa1: float
    kappa2: float
    certified: bool
    g: float
    cap: float
    probes: int
    seed: int
    form: str
    kappa2_grid: np.ndarray = field(repr=False, default_factory=lambda: KAPPA2_GRID.copy())
    frontier: np.ndarray = field(repr=False, default=None)
    # per-probe (||X d||^2 / n, ||d||^2, g R(d)^2)
    terms: tuple = field(repr=False, default=None)

    def kappa1_at(self, kappa2: float) -> float:
        """Largest feasible kappa1 at a given kappa2, before the cap."""
        a, b, c = self.terms
        return float(np.min((a + kappa2 * c) / b))


def _re_probes(reg: RegularizerSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """One third dense Gaussian, one third sparse, one third on the cone boundary."""
    p = reg.p
    units = reg.groups if reg.kind is Kind.GROUP else [np.array([j]) for j in range(p)]
    n_units = len(units)
    probes = np.empty((count, p))
    thirds = np.array_split(np.arange(count), 3)
    probes[thirds[0]] = rng.standard_normal((thirds[0].size, p))
    for part, boundary in ((thirds[1], False), (thirds[2], True)):
        for i in part:
            k = int(np.clip(np.round(np.exp(rng.uniform(0, np.log(max(n_units / 2, 1))))), 1, n_units))
            chosen = rng.choice(n_units, size=k, replace=False)
            mask = np.zeros(p, dtype=bool)
            for t in chosen:
                mask[units[t]] = True
            d = np.where(mask, rng.standard_normal(p), 0.0)
            if boundary and k < n_units:
                off = np.where(mask, 0.0, rng.standard_normal(p))
                r_on, r_off = eval_norm(reg, d), eval_norm(reg, off)
                d = d + off * (3.0 * r_on / r_off)
            probes[i] = d
    return probes


def rho_group(groups, alpha: float | np.ndarray, n: int, mc: int = 2000, seed=0) -> tuple[float, float]:
    """Monte Carlo E[max_t ||eps_{G_t}||_{alpha*}] / sqrt(n) for eps ~ N(0, I).

    Returns (estimate, standard error).
    """
    if mc < 1000:
        raise ValueError("need at least 1000 Monte Carlo draws")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    groups = [np.asarray(g) for g in groups]
    p = int(sum(g.size for g in groups))
    alphas = np.broadcast_to(np.asarray(alpha, dtype=float), (len(groups),))
    eps = rng.standard_normal((mc, p))
    maxima = np.zeros(mc)
    for g, a in zip(groups, alphas):
        block = eps[:, g]
        if np.isinf(a):
            vals = np.abs(block).sum(axis=1)
        elif a == 2:
            vals = np.sqrt(np.einsum("ij,ij->i", block, block))
        else:
            qd = a / (a - 1.0)
            vals = np.sum(np.abs(block) ** qd, axis=1) ** (1.0 / qd)
        np.maximum(maxima, vals, out=maxima)
    maxima /= np.sqrt(n)
    return float(maxima.mean()), float(maxima.std(ddof=1) / np.sqrt(mc))


def estimate_re_constants(
    X,
    reg: RegularizerSpec | None = None,
    form: str = "l1",
    probes: int = 1000,
    seed=0,
    g: float | None = None,
) -> REReport:
    """Fit (kappa1, kappa2) over a probe set.

    For each kappa2 on ``KAPPA2_GRID`` the largest feasible kappa1 is
    min over probes of (||X d||^2/n + kappa2 g R(d)^2) / ||d||^2. That curve
    grows without bound in kappa2, so kappa1 is capped at the design's mean
    curvature trace(X'X)/(n p); the reported pair is the smallest kappa2
    reaching the best capped kappa1. ``g`` is log p / n for the l1 form and
    rho_G^2 for the group form (estimated by Monte Carlo when not supplied).
    """
    if probes < 1000:
        raise ValueError("need at least 1000 probes")
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if reg is None:
        reg = RegularizerSpec.l1(p)
    seed_value = seed if isinstance(seed, (int, np.integer)) else -1
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if g is None:
        if form == "l1":
            g = np.log(p) / n
        elif form == "group":
            g = rho_group(reg.groups, np.array(reg.alphas), n, 2000, rng)[0] ** 2
        else:
            raise ValueError(f"unknown penalty form {form!r}")
    D = _re_probes(reg, probes, rng)
    XD = X @ D.T
    a = np.einsum("ij,ij->j", XD, XD) / n
    b = np.einsum("ij,ij->i", D, D)
    c = g * np.array([eval_norm(reg, d) ** 2 for d in D])
    frontier = np.array([np.min((a + k2 * c) / b) for k2 in KAPPA2_GRID])
    cap = float(np.einsum("ij,ij->", X, X) / (n * p))
    capped = np.minimum(frontier, cap)
    best = capped.max()
    # relative slack so round-off in the ratio does not push kappa2 off zero
    idx = int(np.flatnonzero(capped >= best - 1e-12 * abs(best))[0])
    return REReport(
        kappa1=float(capped[idx]),
        kappa2=float(KAPPA2_GRID[idx]),
        certified=bool(best > 0),
        g=float(g),
        cap=cap,
        probes=probes,
        seed=seed_value,
        form=form,
        frontier=frontier,
        terms=(a, b, c),
    )


@dataclass
class RSCReport:
    """Fitted  delta_L(d) >= kappa ||d||^2 - tau^2  over cone probes in the unit ball."""

    kappa: float
    tau_sq: float
    certified: bool
    model_exact: bool
    probes: int
    seed: int
    min_slack: float


def verify_rsc(
    loss: LossModel,
    reg: RegularizerSpec,
    pair: SubspacePair,
    theta_star,
    data,
    probes: int = 1000,
    seed=0,
    kappa: float | None = None,
    radius: float = 1.0,
) -> RSCReport:
    """Fit the RSC curvature and tolerance on random members of the cone set.

    If theta* lies in M the tolerance is fixed at zero and kappa is the
    smallest ratio delta_L / ||d||^2. Otherwise, unless ``kappa`` is given,
    kappa is fitted on the probes that satisfy the pure cone constraint
    R(Pi_{Mbar-perp} d) <= 3 R(Pi_{Mbar} d) and tau^2 is the smallest value
    making the bound hold on every probe.
    """
    seed_value = seed if isinstance(seed, (int, np.integer)) else -1
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    theta_star = np.asarray(theta_star, dtype=float)
    approx = eval_norm(reg, pair.proj_m_perp(theta_star))
    exact = approx <= 1e-14 * max(1.0, eval_norm(reg, theta_star))
    if exact:
        approx = 0.0
        theta_in = pair.proj_m(theta_star)
    D = sample_cone(reg, pair, theta_star if not exact else theta_in, probes, rng, radius)
    D = D[np.linalg.norm(D, axis=1) > 0]
    dl = np.array([taylor_error(loss, theta_star, d, data) for d in D])
    sq = np.einsum("ij,ij->i", D, D)
    if exact:
        k = float(np.min(dl / sq))
        tau_sq = 0.0
    else:
        if kappa is None:
            pure = np.array(
                [eval_norm(reg, pair.proj_mbar_perp(d)) <= 3.0 * eval_norm(reg, pair.proj_mbar(d)) for d in D]
            )
            k = float(np.min(dl[pure] / sq[pure])) if pure.any() else 0.0
        else:
            k = float(kappa)
        tau_sq = float(max(0.0, np.max(k * sq - dl)))
    slack = float(np.min(dl - (k * sq - tau_sq)))
    return RSCReport(k, tau_sq, bool(k > 0), bool(exact), int(D.shape[0]), seed_value, slack)


@dataclass(frozen=True)
class ThresholdReport:
    support: tuple[int, ...]
    size_bound: float
    size_ok: bool
    tail_l1: float
    tail_bound: float
    tail_ok: bool


def weak_sparsity_threshold(theta_star, eta: float, q: float, radius: float) -> ThresholdReport:
    """S_eta = {j : |theta*_j| > eta} with its cardinality and tail checks."""
    if not eta > 0:
        raise ValueError("threshold must be positive")
    a = np.abs(np.asarray(theta_star, dtype=float))
    keep = a > eta
    tail = float(a[~keep].sum())
    size_bound = eta ** (-q) * radius
    tail_bound = radius * eta ** (1.0 - q)
    rtol = 1e-12
    return ThresholdReport(
        tuple(np.flatnonzero(keep).tolist()),
        float(size_bound),
        bool(keep.sum() <= size_bound * (1 + rtol)),
        tail,
        float(tail_bound),
        bool(tail <= tail_bound * (1 + rtol)),
    )


@dataclass(frozen=True)
class TailReport:
    frequency: float
    threshold: float
    allowed: float
    std_error: float
    trials: int
    ok: bool


def group_tail_check(X, groups, alpha: float, sigma: float, trials: int = 10_000, seed=0, batch: int = 2000) -> TailReport:
    """Frequency of max_t ||X_{G_t}' w / n||_{alpha*} exceeding
    2 sigma (m^(1 - 1/alpha)/sqrt(n) + sqrt(log N_G / n)) over Gaussian noise draws.

    ``ok`` compares against 2 / N_G^2 plus three binomial standard errors.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    groups = [np.asarray(g) for g in groups]
    m = max(g.size for g in groups)
    n_groups = len(groups)
    threshold = lambda_rule_group(sigma, n, m, alpha, n_groups)
    qd = 1.0 if np.isinf(alpha) else alpha / (alpha - 1.0)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < trials:
        k = min(batch, trials - done)
        W = sigma * rng.standard_normal((n, k))
        G = X.T @ W / n
        worst = np.zeros(k)
        for g in groups:
            blk = G[g]
            if qd == 1.0:
                v = np.abs(blk).sum(axis=0)
            elif qd == 2.0:
                v = np.sqrt(np.einsum("ij,ij->j", blk, blk))
            else:
                v = np.sum(np.abs(blk) ** qd, axis=0) ** (1.0 / qd)
            np.maximum(worst, v, out=worst)
        hits += int(np.count_nonzero(worst >= threshold)) if sigma > 0 else 0
        done += k
    allowed_p = 2.0 / n_groups**2
    freq = hits / trials
    se = np.sqrt(allowed_p * (1 - allowed_p) / trials)
    return TailReport(freq, float(threshold), allowed_p, float(se), trials, bool(freq <= allowed_p + 3 * se))


@dataclass
class CertificateReport:
    lambda_recommended: float
    lambda_rule: float
    gradient_dual: float
    lambda_positive: bool
    cone_ok: bool | None
    cone_slack: float | None
    kappa1: float
    kappa2: float
    re_certified: bool
    kappa_L: float
    tau_sq: float
    rsc_certified: bool
    rho_G: float | None
    mc_samples: int
    seed: int
    failure_frequency: float | None = None
    inputs: dict = field(default_factory=dict)

    def to_text(self) -> str:
        """key = value lines, inputs first."""
        lines = [f"input.{k} = {v}" for k, v in self.inputs.items()]
        for k, v in asdict(self).items():
            if k != "inputs":
                lines.append(f"{k} = {float(v)!r}" if isinstance(v, float) else f"{k} = {v}")
        return "\n".join(lines) + "\n"


def certify_instance(
    loss: LossModel,
    reg: RegularizerSpec,
    pair: SubspacePair,
    data,
    theta_star,
    sigma: float,
    theta_hat=None,
    probes: int = 1000,
    seed: int = 0,
    tail_trials: int = 0,
) -> CertificateReport:
    """Run every applicable check on one instance and collect the results."""
    X, _ = data
    n, p = np.asarray(X).shape
    grad_dual = dual_norm(reg, loss_gradient(loss, theta_star, data))
    lam_grad = 2.0 * grad_dual
    rho = None
    if reg.kind is Kind.GROUP:
        rho, _ = rho_group(reg.groups, np.array(reg.alphas), n, max(probes, 1000), seed)
        alpha = reg.alphas[0]
        lam_rule = lambda_rule_group(sigma, n, reg.max_group_size, alpha, reg.n_groups)
        re = estimate_re_constants(X, reg, "group", probes, seed, g=rho**2)
    else:
        lam_rule = lambda_rule_lasso(sigma, n, p)
        re = estimate_re_constants(X, reg if reg.kind is not Kind.NUCLEAR else None, "l1", probes, seed)
    rsc = verify_rsc(loss, reg, pair, theta_star, data, probes, seed)
    cone_ok = cone_slack = None
    if theta_hat is not None:
        chk = cone_membership(np.asarray(theta_hat) - np.asarray(theta_star), reg, pair, theta_star)
        cone_ok, cone_slack = chk.member, chk.slack
    freq = None
    if tail_trials and reg.kind is Kind.GROUP:
        freq = group_tail_check(X, reg.groups, reg.alphas[0], sigma, tail_trials, seed).frequency
    return CertificateReport(
        lambda_recommended=max(lam_grad, lam_rule),
        lambda_rule=lam_rule,
        gradient_dual=grad_dual,
        lambda_positive=bool(lam_grad > 0),
        cone_ok=cone_ok,
        cone_slack=cone_slack,
        kappa1=re.kappa1,
        kappa2=re.kappa2,
        re_certified=re.certified,
        kappa_L=rsc.kappa,
        tau_sq=rsc.tau_sq,
        rsc_certified=rsc.certified,
        rho_G=rho,
        mc_samples=probes,
        seed=seed,
        failure_frequency=freq,
        inputs=dict(n=n, p=p, sigma=sigma, regularizer=reg.kind.value, loss=loss.kind.value),
    )
