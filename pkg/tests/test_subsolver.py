import numpy as np
import pytest
import scipy.optimize
import scipy.sparse
from numpy.testing import assert_allclose

from icbpg.blocks import BlockPartition
from icbpg.problem import CompositeProblem, L1Regularizer, SpdMetric
from icbpg.prox import ProxQuery
from icbpg.subsolver import (
    LassoSubproblem,
    box_gp_solve,
    build_subproblem,
    duality_gap,
    prox_equivalence_constant,
)


def random_subproblem(rng, m=20, n=8, lam=0.3):
    A = rng.standard_normal((m, n))
    b_tilde = rng.standard_normal(m)
    return LassoSubproblem(A, b_tilde, lam)


def split_reference_min(sub):
    """Independent minimum of the subproblem via its nonnegative split."""
    n = sub.n

    def val(z):
        y = z[:n] - z[n:]
        r = sub.A @ y - sub.b_tilde
        return 0.5 * r @ r + sub.lam * z.sum()

    def grad(z):
        y = z[:n] - z[n:]
        w = sub.A.T @ (sub.A @ y - sub.b_tilde)
        return np.concatenate([w + sub.lam, -w + sub.lam])

    res = scipy.optimize.minimize(val, np.zeros(2 * n), jac=grad,
                                  bounds=[(0.0, None)] * (2 * n),
                                  method="L-BFGS-B",
                                  options=dict(ftol=1e-18, gtol=1e-14,
                                               maxiter=5000))
    return res.fun


def test_subproblem_validation():
    rng = np.random.Generator(np.random.PCG64(0))
    A = rng.standard_normal((5, 3))
    with pytest.raises(ValueError):
        LassoSubproblem(A, np.zeros(4), 0.1)
    with pytest.raises(ValueError):
        LassoSubproblem(A, np.zeros(5), -0.1)
    with pytest.raises(ValueError):
        LassoSubproblem(A, np.zeros(5), 0.1, L_sub=0.0)


def test_duality_gap_upper_bounds_suboptimality():
    rng = np.random.Generator(np.random.PCG64(1))
    for trial in range(25):
        sub = random_subproblem(rng, n=int(rng.integers(2, 10)))
        p_star = split_reference_min(sub)
        y = 2.0 * rng.standard_normal(sub.n)
        gap = duality_gap(sub, y)
        assert gap >= 0.0
        assert gap >= sub.value(y) - p_star - 1e-9 * (1.0 + abs(p_star))


def test_solver_reaches_requested_gap():
    rng = np.random.Generator(np.random.PCG64(2))
    for delta in (1e-2, 1e-5, 1e-8):
        sub = random_subproblem(rng)
        res = box_gp_solve(sub, np.zeros(sub.n), delta)
        assert not res.hit_cap
        assert res.duality_gap <= delta
        assert res.f_decrease_satisfied
        # the gap certifies the value: P(y) - P* <= delta
        p_star = split_reference_min(sub)
        assert sub.value(res.y) - p_star <= delta + 1e-9


def test_zero_delta_requests_machine_precision_gap():
    rng = np.random.Generator(np.random.PCG64(3))
    sub = random_subproblem(rng, m=12, n=5)
    res = box_gp_solve(sub, np.zeros(sub.n), 0.0)
    assert not res.hit_cap
    assert res.duality_gap <= 1e-12 * (1.0 + abs(sub.value(np.zeros(sub.n))))


def test_warm_start_never_increases_objective():
    rng = np.random.Generator(np.random.PCG64(4))
    sub = random_subproblem(rng)
    y0 = rng.standard_normal(sub.n)
    res = box_gp_solve(sub, y0, 1e-6)
    assert sub.value(res.y) <= sub.value(y0) + 1e-12
    # restarting from the answer terminates immediately
    res2 = box_gp_solve(sub, res.y, 1e-6)
    assert res2.inner_iterations == 0
    assert_allclose(res2.y, res.y, rtol=0, atol=0)


def test_trace_is_monotone_and_matches_objective():
    rng = np.random.Generator(np.random.PCG64(5))
    sub = random_subproblem(rng, m=30, n=10)
    y0 = rng.standard_normal(sub.n)
    res = box_gp_solve(sub, y0, 1e-9, record_trace=True)
    trace = res.objective_trace
    assert len(trace) == res.inner_iterations + 1
    for lifted, p_val, gap in trace:
        assert abs(lifted - p_val) <= 1e-10 * (1.0 + abs(p_val))
        assert gap >= 0.0
    p_vals = [p for _, p, _ in trace]
    for a, b in zip(p_vals, p_vals[1:]):
        assert b <= a + 1e-12 * (1.0 + abs(a))


def test_iteration_cap_returns_best_gap_point():
    rng = np.random.Generator(np.random.PCG64(6))
    sub = random_subproblem(rng)
    res = box_gp_solve(sub, np.zeros(sub.n), 1e-12, max_inner=3)
    assert res.hit_cap
    assert res.inner_iterations == 3
    assert res.duality_gap > 1e-12
    # returned point is no worse than any prefix iterate
    probe = box_gp_solve(sub, np.zeros(sub.n), 1e-12, max_inner=3,
                         record_trace=True)
    assert res.duality_gap <= min(g for _, _, g in probe.objective_trace) + 1e-15


def test_impossible_guard_stops_at_fixed_point():
    rng = np.random.Generator(np.random.PCG64(7))
    sub = random_subproblem(rng, m=10, n=4)
    res = box_gp_solve(sub, np.zeros(sub.n), 1e-6,
                       f_guard=lambda y, smooth: False)
    assert res.hit_cap
    assert not res.f_decrease_satisfied
    assert res.inner_iterations < 100_000


def test_negative_delta_rejected():
    rng = np.random.Generator(np.random.PCG64(8))
    sub = random_subproblem(rng)
    with pytest.raises(ValueError):
        box_gp_solve(sub, np.zeros(sub.n), -1e-3)


def make_problem(seed=9, m=24, n=12, p=3, lam=0.25):
    rng = np.random.Generator(np.random.PCG64(seed))
    A = scipy.sparse.csc_matrix(rng.standard_normal((m, n)))
    b = rng.standard_normal(m)
    part = BlockPartition.near_equal(n, p)
    return CompositeProblem(A, b, part, lam, metric_kind="gram"), rng


def test_build_subproblem_shifted_target():
    prob, rng = make_problem()
    x = rng.standard_normal(prob.n)
    residual = prob.residual(x)
    for i in range(prob.p):
        sub = build_subproblem(prob, x, residual, i)
        blk = prob.blocks[i]
        want = blk.A_block @ x[blk.cols] - residual
        assert_allclose(sub.b_tilde, want, rtol=1e-13)
        # optimizing over this block with others frozen is the same problem
        y = rng.standard_normal(sub.n)
        x_try = x.copy()
        x_try[blk.cols] = y
        frozen_l1 = sum(prob.blocks[j].lam_i * np.abs(x[prob.blocks[j].cols]).sum()
                        for j in range(prob.p) if j != i)
        assert_allclose(sub.value(y) + frozen_l1, prob.objective(x_try), rtol=1e-10)


def test_build_subproblem_debug_detects_stale_residual():
    prob, rng = make_problem()
    x = rng.standard_normal(prob.n)
    residual = prob.residual(x)
    build_subproblem(prob, x, residual, 0, debug=True)
    with pytest.raises(RuntimeError):
        build_subproblem(prob, x, residual + 1.0, 0, debug=True)


def test_prox_equivalence_constant_identity():
    prob, rng = make_problem()
    x = rng.standard_normal(prob.n)
    residual = prob.residual(x)
    i = 1
    blk = prob.blocks[i]
    sub = build_subproblem(prob, x, residual, i)
    query = ProxQuery(x=x[blk.cols], g=prob.block_gradient(residual, i),
                      delta=0.1, metric=blk.metric,
                      psi=L1Regularizer(blk.lam_i))
    c = prox_equivalence_constant(sub, query)
    for _ in range(5):
        y = rng.standard_normal(sub.n)
        assert_allclose(query.value(y), sub.value(y) + c, rtol=1e-10)


def test_prox_equivalence_constant_rejects_mismatch():
    prob, rng = make_problem()
    x = rng.standard_normal(prob.n)
    residual = prob.residual(x)
    blk = prob.blocks[0]
    sub = build_subproblem(prob, x, residual, 0)
    g = prob.block_gradient(residual, 0)
    size = len(g)
    wrong_metric = ProxQuery(x=x[blk.cols], g=g, delta=0.1,
                             metric=SpdMetric.scaled_identity(size, 2.0),
                             psi=L1Regularizer(blk.lam_i))
    with pytest.raises(ValueError):
        prox_equivalence_constant(sub, wrong_metric)
    wrong_linear = ProxQuery(x=x[blk.cols], g=g + 1.0, delta=0.1,
                             metric=blk.metric, psi=L1Regularizer(blk.lam_i))
    with pytest.raises(ValueError):
        prox_equivalence_constant(sub, wrong_linear)
