"""Group Lasso sweep under alpha = 2 and alpha = inf on matched cells.

Usage: python scripts/compare_group_alpha.py [--trials 25] [--out results/group_alpha]
"""

import argparse
from dataclasses import replace

import numpy as np

from mest.harness import ExperimentConfig, Regime, emit, rate_regression, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=25)
    ap.add_argument("--seed", type=int, default=107)
    ap.add_argument("--out", default="results/group_alpha")
    args = ap.parse_args()
    base = ExperimentConfig(
        regime=Regime.GROUP_LASSO, n_values=(100, 200, 400, 800, 1600, 3200), n_groups_values=(32, 64),
        s_groups_values=(4,), group_size=4, trials=args.trials, seed=args.seed,
    )
    reports = {}
    for label, alpha in (("alpha2", 2.0), ("alphainf", np.inf)):
        rep = run_experiment(replace(base, alpha=alpha))
        emit(rep, "csv", f"{args.out}/{label}")
        emit(rep, "text", f"{args.out}/{label}")
        fit = rate_regression(rep, "group")
        print(f"{label}: slope={fit.slope:.3f} r2={fit.r2:.3f}")
        reports[label] = rep
    print(f"{'n':>6} {'N_G':>5} {'err(a=2)':>12} {'err(a=inf)':>12}")
    worse = 0
    for a, b in zip(reports["alpha2"].summary, reports["alphainf"].summary):
        worse += b.median_err > a.median_err
        print(f"{a.n:>6} {a.dim:>5} {a.median_err:>12.5g} {b.median_err:>12.5g}")
    print(f"alpha=inf worse in {worse}/{len(reports['alpha2'].summary)} cells")


if __name__ == "__main__":
    main()
