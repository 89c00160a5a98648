"""``key = value`` configuration files.

Blank lines and ``#`` comments are ignored. List-valued keys take
comma-separated values.
"""

from __future__ import annotations

from pathlib import Path

from mest.datagen import Covariance
from mest.errors import ConfigError
from mest.harness import ExperimentConfig, Regime
from mest.solver import SolverConfig

__all__ = ["parse_text", "read_config", "experiment_config"]


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return parse_text(text, str(path))


def _num(kv, key, cast, default):
    if key not in kv:
        return default
    try:
        return cast(kv[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {kv[key]!r} as {cast.__name__}") from exc


def _list(kv, key, cast, default):
    if key not in kv:
        return default
    try:
        vals = tuple(cast(v.strip()) for v in kv[key].split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {kv[key]!r} as a list of {cast.__name__}") from exc
    if not vals:
        raise ConfigError(f"{key}: empty list")
    return vals


_KNOWN = {
    "regime", "n", "p", "s", "q", "radius", "group_size", "n_groups", "s_groups", "alpha",
    "trials", "sigma", "covariance", "rho", "lambda_policy", "lambda", "lambda_margin",
    "magnitude", "group_profile", "probes", "seed", "out", "max_iters", "tol", "fp_tol",
}


def experiment_config(kv: dict[str, str], extra_keys=()) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig`; unknown keys are an error."""
    unknown = set(kv) - _KNOWN - set(extra_keys)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        regime = Regime(kv.get("regime", "lasso_hard"))
    except ValueError as exc:
        raise ConfigError(f"regime must be one of {[r.value for r in Regime]}") from exc
    cov_kind = kv.get("covariance", "identity")
    if cov_kind not in ("identity", "toeplitz"):
        raise ConfigError("covariance must be identity or toeplitz")
    cov = Covariance(cov_kind, _num(kv, "rho", float, 0.0))
    d = ExperimentConfig.__dataclass_fields__
    solver = SolverConfig(
        max_iters=_num(kv, "max_iters", int, SolverConfig.max_iters),
        tol=_num(kv, "tol", float, SolverConfig.tol),
        fp_tol=_num(kv, "fp_tol", float, SolverConfig.fp_tol),
    )
    try:
        return ExperimentConfig(
            regime=regime,
            n_values=_list(kv, "n", int, d["n_values"].default),
            p_values=_list(kv, "p", int, d["p_values"].default),
            s_values=_list(kv, "s", int, d["s_values"].default),
            q_values=_list(kv, "q", float, d["q_values"].default),
            radius=_num(kv, "radius", float, d["radius"].default),
            group_size=_num(kv, "group_size", int, d["group_size"].default),
            n_groups_values=_list(kv, "n_groups", int, d["n_groups_values"].default),
            s_groups_values=_list(kv, "s_groups", int, d["s_groups_values"].default),
            alpha=_num(kv, "alpha", float, d["alpha"].default),
            trials=_num(kv, "trials", int, d["trials"].default),
            sigma=_num(kv, "sigma", float, d["sigma"].default),
            covariance=cov,
            lambda_policy=kv.get("lambda_policy", "rule"),
            lambda_value=_num(kv, "lambda", float, 0.0),
            lambda_margin=_num(kv, "lambda_margin", float, d["lambda_margin"].default),
            magnitude=_num(kv, "magnitude", float, d["magnitude"].default),
            group_profile=kv.get("group_profile", d["group_profile"].default),
            probes=_num(kv, "probes", int, d["probes"].default),
            seed=_num(kv, "seed", int, 0),
            out=kv.get("out", d["out"].default),
            solver=solver,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
