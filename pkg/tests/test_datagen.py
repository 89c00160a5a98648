import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mest.datagen import (
    Covariance,
    TargetSpec,
    block_normalize,
    block_operator_norms,
    child_rng,
    column_normalize,
    load_instance,
    make_instance,
    make_target,
    sample_design,
    sample_noise,
    save_instance,
    synthesize,
)
from mest.errors import DimensionError


def test_identity_design_column_scale():
    n = 400
    X = sample_design(Covariance(), n, 100, 1)
    col = (X**2).sum(axis=0) / n
    assert abs(col.mean() - 1.0) <= 3 / np.sqrt(n)


def test_design_deterministic():
    a = sample_design(Covariance("toeplitz", 0.3), 50, 20, 9)
    b = sample_design(Covariance("toeplitz", 0.3), 50, 20, 9)
    assert a.tobytes() == b.tobytes()


def test_toeplitz_lag_one_correlation():
    X = sample_design(Covariance("toeplitz", 0.5), 2000, 30, 4)
    r = [np.corrcoef(X[:, j], X[:, j + 1])[0, 1] for j in range(29)]
    assert abs(np.mean(r) - 0.5) <= 0.05


def test_non_pd_covariance_rejected():
    bad = Covariance("explicit", matrix=np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        sample_design(bad, 10, 2, 0)
    with pytest.raises(DimensionError):
        sample_design(Covariance("explicit", matrix=np.eye(3)), 10, 2, 0)


def test_column_normalization():
    rng = np.random.default_rng(0)
    X = column_normalize(rng.standard_normal((50, 8)) * rng.uniform(0.1, 5, 8))
    norms = np.linalg.norm(X, axis=0) / np.sqrt(50)
    assert abs(norms.max() - 1.0) <= 1e-12 and np.allclose(norms, 1.0)
    with pytest.raises(ValueError):
        column_normalize(np.zeros((4, 2)))


def test_block_norms():
    n = 6
    vals, exact = block_operator_norms(np.sqrt(n) * np.eye(n), [[0, 1], [2, 3, 4, 5]], 2.0)
    assert np.allclose(vals / np.sqrt(n), 1.0) and exact.all()
    rng = np.random.default_rng(1)
    X = rng.standard_normal((40, 3))
    v, _ = block_operator_norms(X, [[0, 1, 2]], 2.0)
    assert abs(v[0] - np.linalg.svd(X, compute_uv=False)[0]) <= 1e-8


def test_inf_to_two_norm_exact_and_flagged():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((30, 4))
    v, ok = block_operator_norms(X, [[0, 1, 2, 3]], np.inf)
    # vertices of the cube enumerated independently
    signs = np.array(np.meshgrid(*[[-1, 1]] * 4)).reshape(4, -1).T
    assert ok[0] and v[0] == pytest.approx(np.linalg.norm(X @ signs.T, axis=0).max())
    big = rng.standard_normal((30, 25))
    v, ok = block_operator_norms(big, [list(range(25))], np.inf)
    assert not ok[0] and v[0] >= np.linalg.norm(big @ np.ones(25))


def test_block_normalization():
    rng = np.random.default_rng(3)
    groups = [[0, 1, 2], [3, 4], [5, 6, 7]]
    X = block_normalize(rng.standard_normal((60, 8)) * 3, groups)
    v, _ = block_operator_norms(X, groups, 2.0)
    assert np.allclose(v / np.sqrt(60), 1.0, atol=1e-10)


def test_targets():
    t = make_target(TargetSpec.exact_sparse(2), 4, 0)
    assert np.count_nonzero(t) == 2 and np.all(np.abs(t[t != 0]) == 1.0)
    lq = make_target(TargetSpec.lq_ball(0.5, 2.0), 300, 1)
    assert abs(np.sum(np.sqrt(np.abs(lq))) - 2.0) <= 1e-10
    lr = make_target(TargetSpec.low_rank(1), (3, 3), 2).reshape(3, 3)
    assert np.linalg.svd(lr, compute_uv=False)[1] <= 1e-10
    groups = [list(range(i, i + 4)) for i in range(0, 16, 4)]
    g = make_target(TargetSpec.group_sparse(2), 16, 3, groups=groups)
    active = [t for t, grp in enumerate(groups) if np.any(g[grp] != 0)]
    assert len(active) == 2


@given(q=st.floats(0.05, 1.0), radius=st.floats(0.1, 50.0), p=st.integers(1, 200))
def test_lq_ball_membership(q, radius, p):
    t = make_target(TargetSpec.lq_ball(q, radius), p, 5)
    assert abs(np.sum(np.abs(t) ** q) - radius) <= 1e-10 * max(1.0, radius)


@pytest.mark.parametrize(
    "spec,dims",
    [
        (TargetSpec.exact_sparse(5), 4),
        (TargetSpec.lq_ball(0.0, 2.5), 10),
        (TargetSpec.lq_ball(1.5, 1.0), 10),
        (TargetSpec.low_rank(4), (3, 3)),
    ],
)
def test_infeasible_targets(spec, dims):
    with pytest.raises(ValueError):
        make_target(spec, dims, 0)


def test_noise_and_responses():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((20, 5))
    th = rng.standard_normal(5)
    assert np.array_equal(synthesize(X, th, sample_noise("gaussian", 0.0, 20, 0)), X @ th)
    w = sample_noise("rademacher", 0.7, 1000, 1)
    assert set(np.unique(w)) == {-0.7, 0.7}
    with pytest.raises(ValueError):
        sample_noise("cauchy", 1.0, 5, 0)


def test_gaussian_noise_subgaussian_tail():
    # P[|<v, w>| > 2] <= 2 exp(-2) for a fixed unit v and sigma = 1
    trials, n = 10_000, 50
    v = np.ones(n) / np.sqrt(n)
    rng = np.random.default_rng(6)
    hits = sum(abs(v @ sample_noise("gaussian", 1.0, n, rng)) > 2 for _ in range(trials))
    bound = 2 * np.exp(-2)
    assert hits / trials <= bound + 3 * np.sqrt(bound * (1 - bound) / trials)


def test_logistic_symmetric():
    X = np.random.default_rng(7).standard_normal((10_000, 3))
    y = synthesize(X, np.zeros(3), logistic=True, seed=8)
    assert set(np.unique(y)) <= {0.0, 1.0} and abs(y.mean() - 0.5) <= 0.02


def test_instance_round_trip(tmp_path):
    inst = make_instance(30, 12, TargetSpec.exact_sparse(3), 0.5, 11, Covariance("toeplitz", 0.4))
    assert np.allclose(inst.y, inst.X @ inst.theta_star + inst.noise)
    again = make_instance(30, 12, TargetSpec.exact_sparse(3), 0.5, 11, Covariance("toeplitz", 0.4))
    assert inst.X.tobytes() == again.X.tobytes() and inst.y.tobytes() == again.y.tobytes()
    back = load_instance(save_instance(inst, tmp_path / "inst.txt"))
    assert np.array_equal(back.X, inst.X) and np.array_equal(back.y, inst.y)
    assert np.array_equal(back.theta_star, inst.theta_star)
    assert (back.sigma, back.seed, back.covariance) == (0.5, 11, "toeplitz(0.4)")


def test_instance_file_damage(tmp_path):
    inst = make_instance(5, 3, TargetSpec.exact_sparse(1), 1.0, 0)
    path = save_instance(inst, tmp_path / "i.txt")
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-2]) + "\n")
    with pytest.raises(ValueError):
        load_instance(path)


def test_child_streams_differ():
    a = child_rng(7, 0, 1).standard_normal(4)
    b = child_rng(7, 0, 2).standard_normal(4)
    c = child_rng(7, 0, 1).standard_normal(4)
    assert not np.array_equal(a, b) and np.array_equal(a, c)
