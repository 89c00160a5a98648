import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mest.bounds import (
    best_group_subset,
    brute_force_group_subset,
    corollary1_bounds,
    group_bound,
    lasso_hard_bound,
    lasso_weak_bound,
    theorem1_bound,
    weak_regime_ok,
)
from mest.certify import lambda_rule_lasso

pos = st.floats(1e-3, 1e3)


def test_theorem1_examples():
    assert theorem1_bound(0.3, 2.0, 1.5) == pytest.approx(9 * 0.09 * 2.25 / 4)
    assert theorem1_bound(1.0, 1.0, 0.0, tau_sq=0.5) == pytest.approx(1.0)
    assert theorem1_bound(0.4, 1.3, 2.0) == pytest.approx(4 * theorem1_bound(0.2, 1.3, 2.0))
    with pytest.raises(ValueError):
        theorem1_bound(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        theorem1_bound(1.0, 1.0, 1.0, tau_sq=-1)


def test_corollary1_examples():
    assert corollary1_bounds(1.0, 1.0, 1.0) == (9.0, 12.0)
    e, r = corollary1_bounds(0.2, 0.7, 3.0)
    assert r / e == pytest.approx(4 / 3 / 0.2)
    assert corollary1_bounds(0.5, 1.0, 0.0) == (0.0, 0.0)


def test_theorem1_and_corollary1_conventions():
    # the two printed conventions differ by kappa versus kappa^2
    for lam, k, psi in [(0.3, 0.5, 2.0), (1.0, 4.0, 0.1)]:
        assert theorem1_bound(lam, math.sqrt(k), psi) == pytest.approx(corollary1_bounds(lam, k, psi)[0])


def test_lasso_hard_examples():
    e, r = lasso_hard_bound(1.0, 1.0, 8, 256, 1000)
    assert e == pytest.approx(64 * 8 * math.log(256) / 1000) and e == pytest.approx(2.8391, abs=1e-4)
    assert r == pytest.approx(24 * 8 * math.sqrt(math.log(256) / 1000))
    assert lasso_hard_bound(1.0, 1.0, 8, 256, 2000)[0] == pytest.approx(e / 2)


def test_lasso_hard_vs_theorem1_constant():
    # lambda = 4 sigma sqrt(log p / n), Psi = sqrt(s), corollary-1 convention: 144 versus 64
    for sigma, s, p, n in [(1.0, 8, 256, 1000), (0.3, 3, 50, 80)]:
        lam = lambda_rule_lasso(sigma, n, p)
        cor1 = corollary1_bounds(lam, 1.0, math.sqrt(s))[0]
        assert cor1 / lasso_hard_bound(sigma, 1.0, s, p, n)[0] == pytest.approx(9 / 4)


def test_lasso_weak():
    rep = lasso_weak_bound(1.0, 1.0, 2.0, 0.5, 256, 1000, c0=1.0)
    assert rep.bound_err_sq == pytest.approx(2 * (math.log(256) / 1000) ** 0.75)
    assert rep.bound_err_sq == pytest.approx(0.040641, abs=1e-6)
    assert rep.in_regime and rep.inputs["c0"] == 1.0
    # q = 0 with R_0 = s and the default constant is the hard-sparsity bound
    assert lasso_weak_bound(0.7, 0.9, 5, 0.0, 100, 300).bound_err_sq == pytest.approx(
        lasso_hard_bound(0.7, 0.9, 5, 100, 300)[0]
    )
    # q = 1: exponent one half
    a = lasso_weak_bound(1.0, 1.0, 1.0, 1.0, 100, 100).bound_err_sq
    assert a == pytest.approx(64 * math.sqrt(math.log(100) / 100))
    out = lasso_weak_bound(1.0, 1.0, 400.0, 0.5, 100, 50)
    assert not out.in_regime and out.regime.endswith("out_of_regime")
    assert weak_regime_ok(2.0, 0.5, 256, 1000)
    with pytest.raises(ValueError):
        lasso_weak_bound(1.0, 1.0, 1.0, 1.5, 10, 10)


def test_group_bound_examples():
    assert group_bound(0.5, 2.0, 3) == pytest.approx(4 * 0.25 * 3 / 4)
    assert group_bound(0.5, 2.0, 0, tail=7.0) == pytest.approx(4 * 0.5 * 7 / 2)


def test_group_reduces_to_lasso():
    sigma, s, p, n = 1.0, 6, 120, 500
    lam = lambda_rule_lasso(sigma, n, p)
    assert group_bound(lam, 1.3, s) == pytest.approx(lasso_hard_bound(sigma, 1.3, s, p, n)[0])


def test_best_subset_matches_brute_force_example():
    b, chosen = best_group_subset(0.4, 1.0, [4.0, 2.0, 1.0, 0.0])
    bb, bchosen = brute_force_group_subset(0.4, 1.0, [4.0, 2.0, 1.0, 0.0])
    assert b == pytest.approx(bb) and set(chosen) == set(bchosen)


def _exhaustive(lam, kappa, norms):
    best = math.inf
    for k in range(len(norms) + 1):
        for sub in itertools.combinations(range(len(norms)), k):
            tail = sum(norms[i] for i in range(len(norms)) if i not in sub)
            best = min(best, 4 * lam**2 * k / kappa**2 + 4 * lam * tail / kappa)
    return best


@given(
    norms=st.lists(st.floats(0.0, 10.0), min_size=1, max_size=8),
    lam=st.floats(0.01, 3.0),
    kappa=st.floats(0.1, 3.0),
)
def test_prefix_sweep_is_optimal(norms, lam, kappa):
    b, chosen = best_group_subset(lam, kappa, norms)
    assert b == pytest.approx(_exhaustive(lam, kappa, norms), rel=1e-12, abs=1e-12)


@given(lam=pos, kappa=pos, psi=pos, tau=pos, approx=pos, bump=st.floats(1.0001, 3.0))
def test_monotonicity(lam, kappa, psi, tau, approx, bump):
    base = theorem1_bound(lam, kappa, psi, tau, approx)
    assert theorem1_bound(lam * bump, kappa, psi, tau, approx) >= base
    assert theorem1_bound(lam, kappa, psi * bump, tau, approx) >= base
    assert theorem1_bound(lam, kappa, psi, tau * bump, approx) >= base
    assert theorem1_bound(lam, kappa, psi, tau, approx * bump) >= base
    assert theorem1_bound(lam, kappa * bump, psi, tau, approx) <= base
    e, r = corollary1_bounds(lam, kappa, psi)
    e2, r2 = corollary1_bounds(lam * bump, kappa, psi * bump)
    assert e2 >= e and r2 >= r
    assert group_bound(lam * bump, kappa, 3, approx) >= group_bound(lam, kappa, 3, approx)
    assert group_bound(lam, kappa, 3, approx * bump) >= group_bound(lam, kappa, 3, approx)


@given(sigma=pos, kappa=pos, s=st.integers(1, 50), p=st.integers(2, 10_000), n=st.integers(2, 10_000))
def test_lasso_scalings(sigma, kappa, s, p, n):
    e, r = lasso_hard_bound(sigma, kappa, s, p, n)
    e2, r2 = lasso_hard_bound(sigma, kappa, s, p, 2 * n)
    assert e2 == pytest.approx(e / 2) and r2 == pytest.approx(r / np.sqrt(2))
    assert lasso_hard_bound(2 * sigma, kappa, s, p, n)[0] == pytest.approx(4 * e)
