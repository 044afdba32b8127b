import csv
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from icbpg.theory import (
    GRID_COLUMNS,
    RateConstants,
    classify_recurrence_steps,
    corollary_decreasing_K,
    corollary_fixed_K,
    error_floor,
    gamma_constant,
    lemma_bound_decreasing,
    lemma_bound_fixed,
    recurrence_delta_coefficient,
    simulate_worst_case,
    theorem_decreasing_bound,
    theorem_fixed_bound,
    worst_case_grid,
    write_grid_csv,
)


def test_constant_hand_values():
    assert_allclose(gamma_constant(2, 2.0, 1.0, 1.0, 1.0), 144.0, rtol=1e-15)
    assert_allclose(recurrence_delta_coefficient(1, 1.0, 1.0, 1.0, 1.0, 0.0),
                    3.125, rtol=1e-15)
    assert_allclose(error_floor(4.0, 1.0), 2.0, rtol=1e-15)
    with pytest.raises(ValueError):
        gamma_constant(1, 1.0, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        recurrence_delta_coefficient(1, 1.0, 1.0, 1.0, -1.0, 0.0)


def test_fixed_bound_hand_values_and_domain():
    assert_allclose(lemma_bound_fixed(1.0, 0.0, 1.0, 5), 1.0, rtol=1e-15)
    # error-free decay is eventually geometric
    assert_allclose(lemma_bound_fixed(1.0, 0.0, 1.0, 61),
                    4.0 / 60.0, rtol=1e-12)
    assert lemma_bound_fixed(1.0, 0.0, 0.0, 7) == 0.0
    with pytest.raises(ValueError):
        lemma_bound_fixed(1.0, 0.0, 1.0, 1)
    arr = lemma_bound_fixed(1.0, 0.0, 1.0, np.array([2, 5, 9]))
    assert arr.shape == (3,)
    assert_allclose(arr[1], 1.0, rtol=1e-15)


def test_fixed_bound_floor_completion_below_the_floor():
    # A0 = 0.1 far below the floor u = 10: the first branch of the
    # displayed formula goes negative and only the geometric term is left,
    # which no valid bound can match; the completed form floors at
    # min(A0, u) = A0
    verbatim = lemma_bound_fixed(100.0, 1.0, 0.1, 2)
    assert verbatim < 0.1
    completed = lemma_bound_fixed(100.0, 1.0, 0.1, 2, floor_completed=True)
    assert completed == 0.1
    # the extremal sequence actually violates the verbatim formula here
    A = simulate_worst_case(100.0, np.full(2, 1.0), 0.1, 2)
    assert A[2] > verbatim
    assert A[2] <= completed + 1e-15


def test_decreasing_bound_hand_value_and_domain():
    assert_allclose(lemma_bound_decreasing(1.0, 1.0, 1.0, 19), 1.0, rtol=1e-15)
    with pytest.raises(ValueError):
        lemma_bound_decreasing(1.0, 1.0, 1.0, 3)


def test_theorem_wrappers_compose_the_lemma_inputs():
    p, L_f, L_max, L_min, R = 3, 3.0, 1.0, 0.8, 2.0
    gamma = gamma_constant(p, L_f, L_max, L_min, R)
    delta = 1e-3
    Delta = recurrence_delta_coefficient(p, L_f, L_max, L_min, R, delta) * delta
    want = lemma_bound_fixed(gamma, Delta, 1.5, 12)
    got = theorem_fixed_bound(p, L_f, L_max, L_min, R, delta, 1.5, 12)
    assert_allclose(got, want, rtol=1e-15)

    D_tilde = 0.5
    D = D_tilde * recurrence_delta_coefficient(p, L_f, L_max, L_min, R, D_tilde)
    want = lemma_bound_decreasing(gamma, D, 1.5, 12)
    got = theorem_decreasing_bound(p, L_f, L_max, L_min, R, D_tilde, D_tilde,
                                   1.5, 12)
    assert_allclose(got, want, rtol=1e-15)


def test_fixed_corollary_guarantees_its_target():
    p, L_f, L_max, L_min, R = 2, 2.0, 1.0, 1.0, 1.0
    delta, F0_gap, eps = 1e-8, 1.0, 1e-2
    K = corollary_fixed_K(p, L_f, L_max, L_min, R, delta, F0_gap, eps)
    assert K >= 2
    for k in (K, K + 1, 10 * K):
        assert theorem_fixed_bound(p, L_f, L_max, L_min, R, delta,
                                   F0_gap, k) <= eps * (1.0 + 1e-12)
    assert corollary_fixed_K(p, L_f, L_max, L_min, R, delta, -1.0, eps) == 2
    with pytest.raises(ValueError):
        # target below the error floor is unreachable
        corollary_fixed_K(p, L_f, L_max, L_min, R, 1.0, F0_gap, 1e-6)


def test_decreasing_corollary_guarantees_its_target():
    p, L_f, L_max, L_min, R = 2, 2.0, 1.0, 1.0, 1.0
    D_tilde, F0_gap, eps = 0.5, 1.0, 1e-2
    K = corollary_decreasing_K(p, L_f, L_max, L_min, R, D_tilde, D_tilde,
                               F0_gap, eps)
    assert K >= 4
    for k in (K, K + 7):
        assert theorem_decreasing_bound(p, L_f, L_max, L_min, R, D_tilde,
                                        D_tilde, F0_gap, k) <= eps * (1.0 + 1e-12)
    with pytest.raises(ValueError):
        corollary_decreasing_K(p, L_f, L_max, L_min, R, D_tilde, D_tilde,
                               F0_gap, 0.0)


def test_simulator_first_step_golden_ratio():
    # gamma = 1, A0 = 1, no error: t^2 + t = 1 gives t = (sqrt(5) - 1) / 2
    A = simulate_worst_case(1.0, np.zeros(1), 1.0, 1)
    assert_allclose(A[1], (math.sqrt(5.0) - 1.0) / 2.0, rtol=1e-15)


def test_simulator_meets_recurrence_with_equality():
    gamma = 25.0
    deltas = 0.3 / np.arange(1.0, 41.0) ** 2
    A = simulate_worst_case(gamma, deltas, 2.0, 40)
    assert np.all(np.diff(A) <= 0.0)
    for l in range(40):
        slack = A[l] - A[l + 1] + deltas[l] - A[l + 1] ** 2 / gamma
        if A[l + 1] < A[l]:
            assert abs(slack) <= 1e-12 * (1.0 + A[l])
        else:
            assert slack >= -1e-12


def test_simulator_callable_matches_array_and_zero_stays_zero():
    gamma = 10.0
    arr = simulate_worst_case(gamma, lambda l: 1.0 / l ** 2, 1.0, 15)
    vals = 1.0 / np.arange(1.0, 16.0) ** 2
    assert np.array_equal(arr, simulate_worst_case(gamma, vals, 1.0, 15))
    zero = simulate_worst_case(gamma, np.zeros(10), 0.0, 10)
    assert np.all(zero == 0.0)


def test_simulator_input_validation():
    with pytest.raises(ValueError):
        simulate_worst_case(10.0, np.zeros(5), -1.0, 5)
    with pytest.raises(ValueError):
        simulate_worst_case(0.0, np.zeros(5), 1.0, 5)
    with pytest.raises(ValueError):
        simulate_worst_case(10.0, np.array([1.0, 2.0]), 1.0, 2)
    with pytest.raises(ValueError):
        simulate_worst_case(10.0, np.zeros(3), 1.0, 5)
    with pytest.warns(UserWarning):
        simulate_worst_case(0.5, np.zeros(2), 1.0, 2)


def test_classify_recurrence_steps():
    counts = classify_recurrence_steps([1.0, 0.4], [0.0], 1.0)
    assert counts == {"geometric": 1, "slow_small": 0, "slow_large": 0,
                      "zero": 0}
    counts = classify_recurrence_steps([1.0, 0.9], [0.0], 1.0)
    assert counts["slow_small"] == 1
    counts = classify_recurrence_steps([1.0, 0.9], [0.5], 1.0)
    assert counts["slow_large"] == 1
    counts = classify_recurrence_steps([0.0, 0.0], [0.3], 1.0)
    assert counts["zero"] == 1


def test_grid_margins_are_nonnegative(tmp_path):
    for kind in ("fixed", "decreasing"):
        cells = worst_case_grid(kind, horizon=500)
        assert len(cells) == 27
        for cell in cells:
            assert cell.margin >= -1e-12
            if kind == "fixed":
                assert cell.floored == (cell.A0 < error_floor(cell.gamma,
                                                              cell.level))
            else:
                assert not cell.floored
        path = tmp_path / ("%s.csv" % kind)
        write_grid_csv(cells, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == GRID_COLUMNS
        assert len(rows) == 28
        assert float(rows[1][6]) == cells[0].margin
    with pytest.raises(ValueError):
        worst_case_grid("geometric")


def test_rate_constants_bundle():
    with pytest.raises(ValueError):
        RateConstants(gamma=-1.0)
    with pytest.raises(ValueError):
        RateConstants(gamma=10.0, u=-0.1)
    with pytest.warns(UserWarning):
        RateConstants(gamma=0.5)
    p, L_f, L_max, L_min, R = 2, 2.0, 1.0, 1.0, 1.5
    rc = RateConstants.from_problem(p, L_f, L_max, L_min, R, A0=0.7,
                                    delta=1e-4, D_tilde=0.25)
    gamma = gamma_constant(p, L_f, L_max, L_min, R)
    Delta = recurrence_delta_coefficient(p, L_f, L_max, L_min, R, 1e-4) * 1e-4
    assert_allclose(rc.gamma, gamma, rtol=1e-15)
    assert_allclose(rc.u, error_floor(gamma, Delta), rtol=1e-15)
    assert_allclose(rc.D, 0.25 * recurrence_delta_coefficient(
        p, L_f, L_max, L_min, R, 0.25), rtol=1e-15)
    assert rc.A0 == 0.7
