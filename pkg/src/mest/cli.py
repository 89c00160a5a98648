"""Command line entry point: ``mest solve|certify|bound|experiment``.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from mest import bounds
from mest.certify import certify_instance
from mest.config import _num, experiment_config, read_config
from mest.datagen import load_instance, save_instance
from mest.errors import ConfigError
from mest.harness import emit, rate_regression, run_experiment, setup_trial, structure_of
from mest.regularizers import eval_norm, make_subspace_pair
from mest.solver import solve

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _kv_text(items: dict) -> str:
    return "".join(f"{k} = {float(v)!r}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in items.items())


def _load_setup(kv, seed, out):
    cfg = experiment_config(kv, extra_keys=("instance",))
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    instance = None
    if "instance" in kv:
        try:
            instance = load_instance(kv["instance"])
        except OSError as exc:
            raise OSError(f"cannot read instance {kv['instance']}: {exc.strerror or exc}") from exc
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"malformed instance file {kv['instance']}: {exc}") from exc
    st = setup_trial(cfg, 0, 0, instance)
    if instance is None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            save_instance(st.instance, out / "instance.txt")
        except OSError as exc:
            raise OSError(f"cannot write {out / 'instance.txt'}: {exc.strerror or exc}") from exc
    return cfg, st


def cmd_solve(kv, seed, out) -> int:
    cfg, st = _load_setup(kv, seed, out)
    res = solve(st.loss, st.reg, st.instance.data, st.lam, cfg.solver, theta_star=st.instance.theta_star)
    _write(out / "theta_hat.txt", "".join(f"{v!r}\n" for v in res.theta.tolist()))
    err = float(res.delta @ res.delta)
    summary = dict(
        regime=cfg.regime.value, n=st.instance.n, p=st.instance.p, seed=st.seed, lam=st.lam,
        objective=res.trace[-1], iterations=res.iterations, converged=res.converged,
        fp_residual=res.fp_residual, err_l2_sq=err, err_reg=float(eval_norm(st.reg, res.delta)),
    )
    text = _kv_text(summary)
    _write(out / "solve.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_certify(kv, seed, out) -> int:
    tail_trials = int(_num(kv, "tail_trials", int, 0))
    kv = {k: v for k, v in kv.items() if k != "tail_trials"}
    cfg, st = _load_setup(kv, seed, out)
    res = solve(st.loss, st.reg, st.instance.data, st.lam, cfg.solver, theta_star=st.instance.theta_star)
    pair = make_subspace_pair(st.reg, structure_of(cfg, st, st.re.kappa1))
    rep = certify_instance(
        st.loss, st.reg, pair, st.instance.data, st.instance.theta_star, cfg.sigma,
        theta_hat=res.theta, probes=cfg.probes, seed=st.seed, tail_trials=tail_trials,
    )
    text = rep.to_text()
    _write(out / "certificate.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


_BOUND_ARGS = {
    "theorem1": ("lam", "kappa", "psi", "tau_sq", "approx"),
    "corollary1": ("lam", "kappa", "psi"),
    "lasso_hard": ("sigma", "kappa", "s", "p", "n"),
    "lasso_weak": ("sigma", "kappa1", "radius", "q", "p", "n", "c0"),
    "group": ("lam", "kappa", "s_groups", "tail"),
}
_INT_ARGS = {"s", "p", "n", "s_groups"}
_OPTIONAL = {"tau_sq", "approx", "c0", "tail"}


def cmd_bound(kv, seed, out) -> int:
    kind = kv.get("bound")
    if kind not in _BOUND_ARGS:
        raise ConfigError(f"bound must be one of {sorted(_BOUND_ARGS)}")
    names = _BOUND_ARGS[kind]
    unknown = set(kv) - set(names) - {"bound", "out", "seed"}
    if unknown:
        raise ConfigError(f"unknown keys for bound {kind}: {', '.join(sorted(unknown))}")
    args = {}
    for name in names:
        if name not in kv:
            if name in _OPTIONAL:
                continue
            raise ConfigError(f"bound {kind} needs key {name!r}")
        args[name] = _num(kv, name, int if name in _INT_ARGS else float, None)
    try:
        if kind == "theorem1":
            result = dict(bound_err_sq=bounds.theorem1_bound(**args))
        elif kind == "corollary1":
            e, r = bounds.corollary1_bounds(**args)
            result = dict(bound_err_sq=e, bound_reg=r)
        elif kind == "lasso_hard":
            e, r = bounds.lasso_hard_bound(**args)
            result = dict(bound_err_sq=float(e), bound_reg=float(r))
        elif kind == "lasso_weak":
            rep = bounds.lasso_weak_bound(**args)
            result = dict(bound_err_sq=rep.bound_err_sq, regime=rep.regime, in_regime=rep.in_regime)
        else:
            result = dict(bound_err_sq=bounds.group_bound(**args))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    text = _kv_text({"bound": kind, **{f"input.{k}": v for k, v in args.items()}, **result})
    _write(out / "bound.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_experiment(kv, seed, out) -> int:
    cfg = experiment_config(kv)
    cfg = replace(cfg, out=str(out), **({} if seed is None else {"seed": seed}))
    report = run_experiment(cfg)
    csv_path = emit(report, "csv", out)
    txt_path = emit(report, "text", out)
    predictor = {"group_lasso": "group", "lasso_weak": "lq"}.get(cfg.regime.value, "s_log_p_over_n")
    try:
        fit = rate_regression(report, predictor)
        sys.stdout.write(f"rate.slope = {fit.slope:.4f}\nrate.r2 = {fit.r2:.4f}\n")
    except ValueError as exc:
        sys.stdout.write(f"rate = unavailable ({exc})\n")
    sys.stdout.write(f"records = {csv_path}\nreport = {txt_path}\n")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "certify": cmd_certify, "bound": cmd_bound, "experiment": cmd_experiment}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mest", description="Regularized M-estimation experiments.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="key = value configuration file")
    ap.add_argument("--seed", type=int, default=None, help="master seed override")
    ap.add_argument("--out", default=None, help="output directory")
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        kv = read_config(args.config)
        out = Path(args.out or kv.get("out", "results"))
        return COMMANDS[args.command](kv, args.seed, out)
    except ConfigError as exc:
        print(f"mest: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"mest: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
