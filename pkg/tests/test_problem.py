import numpy as np
import pytest
import scipy.sparse
from numpy.testing import assert_allclose

from icbpg.blocks import BlockPartition
from icbpg.problem import (
    CompositeProblem,
    L1Regularizer,
    SpdMetric,
    power_iteration,
    soft_threshold,
)


def random_spd(rng, n):
    G = rng.standard_normal((n, n))
    return G.T @ G + 0.5 * np.eye(n)


def test_power_iteration_matches_dense_eigenvalue():
    rng = np.random.Generator(np.random.PCG64(0))
    B = random_spd(rng, 12)
    est = power_iteration(lambda v: B @ v, 12, iters=200)
    top = np.linalg.eigvalsh(B)[-1]
    assert_allclose(est, top, rtol=1e-8)


def test_spd_metric_from_dense_operations():
    rng = np.random.Generator(np.random.PCG64(1))
    B = random_spd(rng, 7)
    metric = SpdMetric.from_dense(B)
    v = rng.standard_normal(7)
    assert_allclose(metric.apply(v), B @ v, rtol=1e-12)
    assert_allclose(metric.solve(v), np.linalg.solve(B, v), rtol=1e-10)
    assert_allclose(metric.norm(v), np.sqrt(v @ B @ v), rtol=1e-12)
    assert_allclose(metric.dual_norm(v),
                    np.sqrt(v @ np.linalg.solve(B, v)), rtol=1e-10)
    assert_allclose(metric.dense(), B, rtol=1e-14)


def test_spd_metric_from_dense_rejects_bad_input():
    with pytest.raises(ValueError):
        SpdMetric.from_dense(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        SpdMetric.from_dense(-np.eye(3))


def test_spd_metric_from_gram_dense_and_cg_paths_agree():
    rng = np.random.Generator(np.random.PCG64(2))
    A = rng.standard_normal((15, 6))
    dense = SpdMetric.from_gram(A)
    cg = SpdMetric.from_gram(A, dense_threshold=2)
    v = rng.standard_normal(6)
    assert_allclose(dense.apply(v), A.T @ (A @ v), rtol=1e-12)
    assert_allclose(cg.solve(v), dense.solve(v), rtol=1e-8)
    assert_allclose(dense.norm(v), np.linalg.norm(A @ v), rtol=1e-12)


def test_spd_metric_from_gram_rejects_rank_deficient():
    A = np.ones((4, 2))
    with pytest.raises(ValueError):
        SpdMetric.from_gram(A)


def test_scaled_identity_metric():
    metric = SpdMetric.scaled_identity(4, 2.5)
    v = np.array([1.0, -2.0, 0.0, 3.0])
    assert_allclose(metric.apply(v), 2.5 * v)
    assert_allclose(metric.solve(v), v / 2.5)
    assert_allclose(metric.norm(v), np.sqrt(2.5) * np.linalg.norm(v))
    assert metric.kind == "identity"


def test_soft_threshold_known_values():
    v = np.array([3.0, -0.5, 0.2, -4.0])
    assert_allclose(soft_threshold(v, 1.0), [2.0, 0.0, 0.0, -3.0])
    assert_allclose(soft_threshold(v, 0.0), v)
    with pytest.raises(ValueError):
        soft_threshold(v, -0.1)


def test_l1_regularizer_prox_and_value():
    psi = L1Regularizer(0.4)
    v = np.array([1.0, -0.3, 0.0])
    assert_allclose(psi.value(v), 0.4 * 1.3)
    assert_allclose(psi.prox(v), soft_threshold(v, 0.4))
    assert_allclose(psi.prox(v, t=2.0), soft_threshold(v, 0.8))
    with pytest.raises(ValueError):
        L1Regularizer(-1.0)


def test_project_subdifferential_is_valid_subgradient_selection():
    psi = L1Regularizer(0.7)
    u = np.array([2.0, 0.0, -1.0, 0.0])
    w = np.array([0.1, 5.0, 0.2, -0.3])
    r = psi.project_subdifferential(w, u)
    assert_allclose(r, [0.7, 0.7, -0.7, -0.3])
    # any output is an exact subgradient: epsilon zero
    assert psi.subgradient_epsilon(r, u) == 0.0


def test_subgradient_epsilon_values():
    psi = L1Regularizer(0.5)
    u = np.array([1.0, -2.0])
    assert psi.subgradient_epsilon(np.array([0.5, -0.5]), u) == 0.0
    # s inside the box but misaligned: eps = sum lam|u| - s.u
    s = np.array([0.0, 0.5])
    assert_allclose(psi.subgradient_epsilon(s, u), 0.5 * 3.0 - (-1.0))
    assert psi.subgradient_epsilon(np.array([0.6, 0.0]), u) == np.inf


def small_problem(metric_kind, seed=7, m=30, n=12, p=3, lam=0.2):
    rng = np.random.Generator(np.random.PCG64(seed))
    A = scipy.sparse.csc_matrix(rng.standard_normal((m, n)))
    b = rng.standard_normal(m)
    part = BlockPartition.near_equal(n, p)
    return CompositeProblem(A, b, part, lam, metric_kind=metric_kind), rng


def test_problem_objective_and_gradient_against_dense_formulas():
    prob, rng = small_problem("gram")
    x = rng.standard_normal(prob.n)
    Ad = prob.A.toarray()
    r = Ad @ x - prob.b
    assert_allclose(prob.residual(x), r, rtol=1e-12)
    assert_allclose(prob.smooth_value(x), 0.5 * r @ r, rtol=1e-12)
    assert_allclose(prob.objective(x),
                    0.5 * r @ r + 0.2 * np.abs(x).sum(), rtol=1e-12)
    assert_allclose(prob.gradient(x), Ad.T @ r, rtol=1e-12)
    res = prob.residual(x)
    for i in range(prob.p):
        sl = prob.partition.slice_of(i)
        assert_allclose(prob.block_gradient(res, i), Ad[:, sl].T @ r,
                        rtol=1e-12)


def test_gram_metric_constants():
    prob, _ = small_problem("gram")
    assert prob.L_f == float(prob.p)
    assert_allclose(prob.L, np.ones(prob.p))
    assert prob.L_min == prob.L_max == 1.0


def test_identity_metric_constants_overestimate_block_norm():
    prob, _ = small_problem("diag")
    Ad = prob.A.toarray()
    for i, blk in enumerate(prob.blocks):
        sl = prob.partition.slice_of(i)
        top = np.linalg.norm(Ad[:, sl], 2) ** 2
        assert blk.L_i >= top * (1.0 - 1e-9)
        assert blk.metric.kind == "identity"


def test_block_and_global_smoothness_inequalities():
    rng = np.random.Generator(np.random.PCG64(11))
    for kind in ("gram", "diag"):
        prob, _ = small_problem(kind)
        for _ in range(20):
            x = rng.standard_normal(prob.n)
            t = rng.standard_normal(prob.n)
            assert prob.verify_global_smoothness(x, t) <= 1e-9
            for i in range(prob.p):
                ti = rng.standard_normal(prob.partition.sizes[i])
                assert prob.verify_block_smoothness(x, ti, i) <= 1e-9


def test_global_norms_match_blockwise_definition():
    prob, rng = small_problem("gram")
    x = rng.standard_normal(prob.n)
    acc = 0.0
    for i in range(prob.p):
        acc += prob.block_norm(i, x[prob.partition.slice_of(i)]) ** 2
    assert_allclose(prob.global_B_norm(x), np.sqrt(acc), rtol=1e-12)


def test_estimate_global_smoothness_within_provable_bound():
    prob, _ = small_problem("gram")
    est = prob.estimate_global_smoothness()
    assert est <= prob.L_f * (1.0 + 1e-9)
