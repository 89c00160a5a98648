"""Monte Carlo experiments: grids of synthetic problems, solved, certified and
compared against the matching error bound."""

from __future__ import annotations

import csv
import enum
import itertools
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from mest import bounds
from mest.certify import (
    estimate_re_constants,
    cone_membership,
    lambda_from_gradient,
    lambda_rule_group,
    lambda_rule_lasso,
    rho_group,
    verify_rsc,
)
from mest.datagen import Covariance, TargetSpec, make_instance
from mest.errors import ConfigError
from mest.losses import LEAST_SQUARES, LOGISTIC
from mest.regularizers import RegularizerSpec, eval_norm, make_subspace_pair
from mest.solver import SolverConfig, solve

__all__ = [
    "Regime",
    "ExperimentConfig",
    "TrialRecord",
    "ExperimentReport",
    "RateFit",
    "CSV_COLUMNS",
    "run_trial",
    "run_experiment",
    "summarize",
    "rate_regression",
    "emit",
    "read_csv",
]


class Regime(str, enum.Enum):
    LASSO_HARD = "lasso_hard"
    LASSO_WEAK = "lasso_weak"
    GROUP_LASSO = "group_lasso"
    LOGISTIC_L1 = "logistic_l1"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment grid.

    Cells are the product of ``n_values`` with ``p_values`` (or
    ``n_groups_values`` for the group regime) and ``s_values`` (or
    ``q_values``, or ``s_groups_values``). ``lambda_policy`` is "rule" (the closed-form λ rule of the regime),
    "oracle" (2 R*(grad L(theta*)) + ``lambda_margin``) or "fixed".
    """

    regime: Regime = Regime.LASSO_HARD
    n_values: tuple[int, ...] = (400,)
    p_values: tuple[int, ...] = (128,)
    s_values: tuple[int, ...] = (8,)
    q_values: tuple[float, ...] = (0.5,)
    radius: float = 2.0
    group_size: int = 4
    n_groups_values: tuple[int, ...] = (32,)
    s_groups_values: tuple[int, ...] = (4,)
    alpha: float = 2.0
    trials: int = 10
    sigma: float = 1.0
    covariance: Covariance = Covariance()
    lambda_policy: str = "rule"
    lambda_value: float = 0.0
    lambda_margin: float = 1e-6
    magnitude: float = 1.0
    group_profile: str = "gaussian"
    probes: int = 1000
    seed: int = 0
    out: str = "results"
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.lambda_policy not in ("rule", "oracle", "fixed"):
            raise ConfigError(f"unknown lambda policy {self.lambda_policy!r}")
        if self.lambda_policy == "fixed" and not self.lambda_value > 0:
            raise ConfigError("fixed lambda policy needs a positive lambda_value")
        if self.group_profile not in ("sign", "gaussian"):
            raise ConfigError(f"unknown group profile {self.group_profile!r}")
        if not self.cells():
            raise ConfigError("experiment grid is empty")

    def cells(self) -> list[tuple]:
        """(n, p_or_NG, s_or_q_or_sG) per cell, in a fixed order."""
        if self.regime is Regime.GROUP_LASSO:
            return list(itertools.product(self.n_values, self.n_groups_values, self.s_groups_values))
        if self.regime is Regime.LASSO_WEAK:
            return list(itertools.product(self.n_values, self.p_values, self.q_values))
        return list(itertools.product(self.n_values, self.p_values, self.s_values))


@dataclass
class TrialRecord:
    regime: str
    n: int
    p: int
    s: int
    q: float
    sG: int
    trial: int
    # `lambda` is a keyword; the CSV column is still named lambda
    lam: float
    err_l2_sq: float
    err_reg: float
    bound: float
    cone_ok: bool
    kappa1_hat: float
    kappa2_hat: float
    iters: int
    wall_ms: float
    converged: bool = True
    cell: int = 0

    def row(self) -> list:
        return [
            self.regime, self.n, self.p, self.s, self.q, self.sG, self.trial, self.lam,
            self.err_l2_sq, self.err_reg, self.bound, self.cone_ok, self.kappa1_hat,
            self.kappa2_hat, self.iters, self.wall_ms,
        ]


CSV_COLUMNS = (
    "regime,n,p,s,q,sG,trial,lambda,err_l2_sq,err_reg,bound,cone_ok,"
    "kappa1_hat,kappa2_hat,iters,wall_ms"
).split(",")


def _cell_problem(cfg: ExperimentConfig, cell: tuple):
    """Regularizer, target spec, groups and dimension for one cell."""
    n, dim, third = cell
    if cfg.regime is Regime.GROUP_LASSO:
        reg = RegularizerSpec.equal_groups(dim, cfg.group_size, cfg.alpha)
        return reg, TargetSpec.group_sparse(third, cfg.magnitude, cfg.group_profile), reg.groups
    p = dim
    if cfg.regime is Regime.LASSO_WEAK:
        return RegularizerSpec.l1(p), TargetSpec.lq_ball(third, cfg.radius), None
    return RegularizerSpec.l1(p), TargetSpec.exact_sparse(third, cfg.magnitude), None


def _trial_seed(cfg: ExperimentConfig, cell_idx: int, trial: int) -> int:
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(cell_idx, trial))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class TrialSetup:
    """Everything a trial needs before solving."""

    instance: object
    reg: RegularizerSpec
    loss: object
    lam: float
    re: object
    seed: int
    cell: tuple


def choose_lambda(cfg: ExperimentConfig, loss, reg, data, theta_star, n: int, dim: int) -> float:
    if cfg.lambda_policy == "fixed":
        return cfg.lambda_value
    if cfg.lambda_policy == "oracle":
        return lambda_from_gradient(loss, reg, data, theta_star) + cfg.lambda_margin
    if cfg.regime is Regime.GROUP_LASSO:
        return lambda_rule_group(cfg.sigma, n, cfg.group_size, cfg.alpha, dim)
    return lambda_rule_lasso(cfg.sigma, n, reg.p)


def setup_trial(cfg: ExperimentConfig, cell_idx: int, trial: int, instance=None) -> TrialSetup:
    """Instance, regularizer, lambda and RE constants for one trial.

    A preloaded ``instance`` replaces the generated one; its shape must match
    the cell.
    """
    cell = cfg.cells()[cell_idx]
    n, dim, _ = cell
    reg, target, groups = _cell_problem(cfg, cell)
    logistic = cfg.regime is Regime.LOGISTIC_L1
    loss = LOGISTIC if logistic else LEAST_SQUARES
    seed = _trial_seed(cfg, cell_idx, trial)
    if instance is None:
        instance = make_instance(
            n, reg.p, target, cfg.sigma, seed, cfg.covariance,
            logistic=logistic, groups=groups,
            normalize="blocks" if groups is not None else "columns",
        )
    elif instance.X.shape != (n, reg.p):
        raise ConfigError(f"instance has shape {instance.X.shape}, config expects {(n, reg.p)}")
    if cfg.regime is Regime.GROUP_LASSO:
        rho, _ = rho_group(reg.groups, cfg.alpha, n, 2000, seed)
        re = estimate_re_constants(instance.X, reg, "group", cfg.probes, seed, g=rho**2)
    else:
        re = estimate_re_constants(instance.X, reg, "l1", cfg.probes, seed)
    lam = choose_lambda(cfg, loss, reg, instance.data, instance.theta_star, n, dim)
    return TrialSetup(instance, reg, loss, float(lam), re, seed, cell)


def structure_of(cfg: ExperimentConfig, setup: TrialSetup, kappa1: float):
    """Support (or group set) defining M for the trial's target."""
    theta = setup.instance.theta_star
    if cfg.regime is Regime.GROUP_LASSO:
        return [t for t, g in enumerate(setup.reg.groups) if np.any(theta[g] != 0)]
    if cfg.regime is Regime.LASSO_WEAK:
        eta = setup.lam / kappa1 if kappa1 > 0 else setup.lam
        return np.flatnonzero(np.abs(theta) > eta)
    return np.flatnonzero(theta)


def run_trial(cfg: ExperimentConfig, cell_idx: int, trial: int) -> TrialRecord:
    """Generate, solve, certify and bound one trial of one cell."""
    start = time.perf_counter()
    st = setup_trial(cfg, cell_idx, trial)
    n, dim, third = st.cell
    inst, reg, lam = st.instance, st.reg, st.lam
    p = reg.p
    kappa1 = st.re.kappa1

    res = solve(st.loss, reg, inst.data, lam, cfg.solver, theta_star=inst.theta_star)
    delta = res.delta
    err = float(delta @ delta)
    err_reg = eval_norm(reg, delta)

    support = structure_of(cfg, st, kappa1)
    pair = make_subspace_pair(reg, support)
    s_col, q_col, sg_col = third, 0.0, 0
    bound = math.inf
    if cfg.regime is Regime.LASSO_HARD:
        if kappa1 > 0:
            bound = bounds.lasso_hard_bound(cfg.sigma, kappa1, third, p, n)[0]
    elif cfg.regime is Regime.LASSO_WEAK:
        q_col, s_col = float(third), len(support)
        if kappa1 > 0:
            bound = bounds.lasso_weak_bound(cfg.sigma, kappa1, cfg.radius, third, p, n).bound_err_sq
    elif cfg.regime is Regime.GROUP_LASSO:
        s_col, sg_col = third * cfg.group_size, third
        if kappa1 > 0:
            bound = bounds.group_bound(lam, kappa1, third, 0.0)
    else:
        # logistic curvature differs from the design's, so use the fitted RSC constant
        rsc = verify_rsc(st.loss, reg, pair, inst.theta_star, inst.data, cfg.probes, st.seed)
        kappa1 = rsc.kappa
        if kappa1 > 0:
            bound = bounds.theorem1_bound(lam, kappa1, math.sqrt(third))
    cone = cone_membership(delta, reg, pair, inst.theta_star)
    wall = (time.perf_counter() - start) * 1e3
    return TrialRecord(
        regime=cfg.regime.value, n=n, p=p, s=int(s_col), q=q_col, sG=sg_col, trial=trial,
        lam=float(lam), err_l2_sq=err, err_reg=float(err_reg), bound=float(bound),
        cone_ok=cone.member, kappa1_hat=float(kappa1), kappa2_hat=float(st.re.kappa2),
        iters=res.iterations, wall_ms=wall, converged=res.converged, cell=cell_idx,
    )


def _run_task(args):
    cfg, cell_idx, trial = args
    return run_trial(cfg, cell_idx, trial)


def worker_count() -> int:
    """Parallel workers: MEST_THREADS if set, else the CPU count."""
    env = os.environ.get("MEST_THREADS")
    cpus = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpus))
        except ValueError as exc:
            raise ConfigError(f"MEST_THREADS must be an integer, got {env!r}") from exc
    return cpus


@dataclass
class CellSummary:
    cell: int
    n: int
    dim: int
    third: float
    trials: int
    median_err: float
    mean_err: float
    median_bound: float
    bound_violation_freq: float
    median_below_bound: bool
    cone_failures: int
    cert_failures: int
    nonconverged: int


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list[TrialRecord]
    summary: list[CellSummary] = field(default_factory=list)


def summarize(cfg: ExperimentConfig, records: list[TrialRecord]) -> list[CellSummary]:
    out = []
    cells = cfg.cells()
    for idx, cell in enumerate(cells):
        rows = [r for r in records if r.cell == idx]
        if not rows:
            continue
        errs = np.array([r.err_l2_sq for r in rows])
        bnds = np.array([r.bound for r in rows])
        med_b = float(np.median(bnds))
        out.append(
            CellSummary(
                cell=idx, n=cell[0], dim=cell[1], third=cell[2], trials=len(rows),
                median_err=float(np.median(errs)), mean_err=float(errs.mean()),
                median_bound=med_b,
                bound_violation_freq=float(np.mean(errs > bnds)),
                median_below_bound=bool(np.median(errs) <= med_b),
                cone_failures=sum(not r.cone_ok for r in rows),
                cert_failures=sum(not r.kappa1_hat > 0 for r in rows),
                nonconverged=sum(not r.converged for r in rows),
            )
        )
    return out


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    """Every trial of every cell; records come back sorted by (cell, trial)."""
    tasks = [(cfg, c, t) for c in range(len(cfg.cells())) for t in range(cfg.trials)]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        records = [_run_task(t) for t in tasks]
    records.sort(key=lambda r: (r.cell, r.trial))
    return ExperimentReport(cfg, records, summarize(cfg, records))


PREDICTORS = ("s_log_p_over_n", "lq", "group")


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    cells: int
    decades: float


def _predictor(cfg: ExperimentConfig, cell: tuple, name: str) -> float:
    n, dim, third = cell
    if name == "s_log_p_over_n":
        return third * math.log(dim) / n
    if name == "lq":
        return cfg.radius * (math.log(dim) / n) ** (1.0 - third / 2.0)
    if name == "group":
        return third * cfg.group_size / n + third * math.log(dim) / n
    raise ValueError(f"unknown predictor {name!r}; choose from {PREDICTORS}")


def rate_regression(report: ExperimentReport, predictor: str, min_decades: float = 1.0) -> RateFit:
    """Least-squares fit of log(median err) on log(predictor) across cells.

    Needs at least four cells whose predictor values span ``min_decades``
    decades.
    """
    cells = report.config.cells()
    xs, ys = [], []
    for summ in report.summary:
        xs.append(math.log(_predictor(report.config, cells[summ.cell], predictor)))
        ys.append(math.log(summ.median_err))
    xs, ys = np.array(xs), np.array(ys)
    if xs.size < 4:
        raise ValueError(f"rate regression needs at least 4 cells, got {xs.size}")
    decades = float((xs.max() - xs.min()) / math.log(10))
    if decades <= 0 or decades < min_decades:
        raise ValueError(f"predictor spans {decades:.3f} decades; need at least {min_decades}")
    A = np.column_stack([xs, np.ones_like(xs)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ys, rcond=None)
    resid = ys - A @ np.array([slope, intercept])
    r2 = 1.0 - float(resid @ resid) / float(((ys - ys.mean()) ** 2).sum())
    return RateFit(float(slope), float(intercept), r2, int(xs.size), decades)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    return str(v)


def emit(report: ExperimentReport, fmt: str, out_dir) -> Path:
    """Write ``records.csv`` (fmt "csv") or ``report.txt`` (fmt "text") into ``out_dir``.

    Numbers carry 10 significant digits; booleans are written as 0/1.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            path = out_dir / "records.csv"
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                for r in report.records:
                    w.writerow([_fmt(v) for v in r.row()])
            return path
        if fmt == "text":
            path = out_dir / "report.txt"
            path.write_text(report_text(report))
            return path
    except OSError as exc:
        raise OSError(f"cannot write results to {out_dir}: {exc.strerror or exc}") from exc
    raise ValueError(f"unknown output format {fmt!r}")


def report_text(report: ExperimentReport) -> str:
    cfg = report.config
    lines = ["[config]"]
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, Covariance):
            v = v.describe()
        elif isinstance(v, SolverConfig):
            v = ", ".join(f"{k}={x}" for k, x in asdict(v).items())
        elif isinstance(v, enum.Enum):
            v = v.value
        elif isinstance(v, tuple):
            v = ", ".join(_fmt(x) for x in v)
        lines.append(f"{f.name} = {v}")
    for s in report.summary:
        lines.append("")
        lines.append(f"[cell {s.cell}]")
        for k, v in asdict(s).items():
            if k != "cell":
                lines.append(f"{k} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


_INT_COLS = {"n", "p", "s", "sG", "trial", "iters"}


def read_csv(path) -> list[dict]:
    """Parse ``records.csv`` back into typed dicts keyed by column name."""
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        for raw in reader:
            row = {}
            for k, v in zip(header, raw):
                if k == "regime":
                    row[k] = v
                elif k == "cone_ok":
                    row[k] = v == "1"
                elif k in _INT_COLS:
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            rows.append(row)
    return rows


