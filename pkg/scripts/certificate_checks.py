"""Restricted eigenvalue fits and the group noise tail check over repetitions.

Usage: python scripts/certificate_checks.py [--reps 40]
"""

import argparse

import numpy as np

from mest.certify import estimate_re_constants, group_tail_check
from mest.datagen import block_normalize


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    root = np.random.SeedSequence(args.seed)
    k1, k1_at9 = [], []
    for child in root.spawn(args.reps):
        rng = np.random.default_rng(child)
        rep = estimate_re_constants(rng.standard_normal((200, 100)), probes=1000, seed=rng)
        k1.append(rep.kappa1)
        k1_at9.append(rep.kappa1_at(9.0))
    print(f"RE n=200 p=100: kappa1 median={np.median(k1):.3f} min={min(k1):.3f}; "
          f"kappa1 at kappa2=9 min={min(k1_at9):.3f}")

    rng = np.random.default_rng(args.seed)
    for n_groups in (16, 64):
        groups = [list(range(i, i + 4)) for i in range(0, 4 * n_groups, 4)]
        X = block_normalize(rng.standard_normal((200, 4 * n_groups)), groups)
        for alpha in (2.0, np.inf):
            rep = group_tail_check(X, groups, alpha, 1.0, trials=10_000, seed=rng)
            print(f"tail N_G={n_groups} alpha={alpha}: freq={rep.frequency:.4f} "
                  f"allowed={rep.allowed:.4f} ok={rep.ok}")


if __name__ == "__main__":
    main()
