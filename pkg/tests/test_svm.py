import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kpboost import svm
from kpboost.errors import ConvergenceError, InfeasibleError, ParameterError, ShapeError
from kpboost.kernels import KernelMatrix, gram, perturb
from kpboost.svm import (TrainedSVM, _smo, decision_values, dual_objective, kkt_violation, predict, sign,
                         solve_dual)
from oracles import dual_oracle


def random_problem(seed, n=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(4, 21))
    X = rng.normal(size=(n, 2))
    y = np.where(rng.random(n) < 0.4, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return gram(X, float(rng.choice([0.5, 1.0, 2.0]))), y, float(rng.choice([0.1, 1.0, 10.0, 100.0]))


def test_two_point_identity():
    m = solve_dual(KernelMatrix(np.eye(2)), np.array([1.0, -1.0]), C=5.0)
    assert m.lam == pytest.approx([1.0, 1.0], abs=1e-12)
    assert m.bias == pytest.approx(0.0, abs=1e-12)
    f = decision_values(m, np.eye(2)[:, [0]])
    assert f[0] == pytest.approx(1.0, abs=1e-12)


def test_single_class_infeasible():
    with pytest.raises(InfeasibleError):
        solve_dual(KernelMatrix(np.eye(3)), np.ones(3), C=1.0)


def test_bad_labels():
    with pytest.raises(ParameterError):
        solve_dual(KernelMatrix(np.eye(2)), np.array([1.0, 0.0]), C=1.0)


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        solve_dual(KernelMatrix(np.eye(3)), np.array([1.0, -1.0]), C=1.0)


def test_twelve_points_against_oracle():
    K, y, C = random_problem(12, n=12)
    m = solve_dual(K, y, C, tol=1e-8)
    _, best = dual_oracle(K.values, y, C)
    assert dual_objective(K, y, m.lam) == pytest.approx(best, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_feasibility_and_kkt(seed):
    K, y, C = random_problem(seed)
    m = solve_dual(K, y, C)
    assert np.all(m.lam >= 0) and np.all(m.lam <= C)
    assert abs(float(m.lam @ y)) <= 1e-6 * C
    assert kkt_violation(m, K) <= svm.DEFAULT_TOL + 1e-9


def test_free_support_vector_on_margin():
    K, y, C = random_problem(7, n=20)
    m = solve_dual(K, y, C)
    f = decision_values(m, K)
    free = np.flatnonzero((m.lam > 0) & (m.lam < C))
    assert free.size > 0
    assert np.max(np.abs(f[free] - y[free])) <= svm.DEFAULT_TOL


def test_zero_multipliers_give_bias():
    m = TrainedSVM(np.zeros(3), 0.25, np.array([1.0, -1.0, 1.0]), 1.0)
    assert decision_values(m, np.random.default_rng(0).random((3, 4))).tolist() == [0.25] * 4


def test_sign_ties():
    assert sign(np.array([-0.3, 0.7])).tolist() == [-1, 1]
    assert sign(np.array([0.0])).tolist() == [1]


def test_separable_training_predictions():
    X = np.array([[-2.0, 0], [-2.5, 0.3], [-1.8, -0.4], [2.0, 0], [2.2, 0.5], [1.9, -0.2]])
    y = np.array([-1.0, -1, -1, 1, 1, 1])
    K = gram(X, 1.0)
    m = solve_dual(K, y, 100.0)
    assert predict(m, K).tolist() == y.tolist()


def test_objective_nondecreasing_over_iterations():
    K, y, C = random_problem(3, n=15)
    prev = -np.inf
    for cap in range(0, 60):
        lam, _, _, _ = _smo(K.values, y, C, 1e-12, cap, True, np.zeros(y.size))
        obj = dual_objective(K, y, lam)
        assert obj >= prev - 1e-12
        prev = obj


def test_unit_factors_bit_identical():
    K, y, C = random_problem(9)
    a = solve_dual(K, y, C)
    b = solve_dual(perturb(K, np.ones(K.n)), y, C)
    assert np.array_equal(a.lam, b.lam) and a.bias == b.bias


@pytest.mark.parametrize("selection", ["first", "second"])
def test_selection_rules_agree(selection):
    K, y, C = random_problem(11, n=18)
    m = solve_dual(K, y, C, tol=1e-8, selection=selection)
    _, best = dual_oracle(K.values, y, C)
    assert dual_objective(K, y, m.lam) == pytest.approx(best, abs=1e-6 * (1 + abs(best)))


def test_warm_start_from_solution():
    K, y, C = random_problem(5, n=16)
    m = solve_dual(K, y, C)
    again = solve_dual(K, y, C, init=m.lam)
    assert again.n_iter == 0
    assert np.array_equal(again.lam, m.lam)


def test_warm_start_rejects_infeasible():
    K, y, C = random_problem(5, n=16)
    init = np.zeros(16)
    init[0] = 1.0
    with pytest.raises(ParameterError):
        solve_dual(K, y, C, init=init)


def test_convergence_error_keeps_iterate():
    K, y, _ = random_problem(2, n=20)
    with pytest.raises(ConvergenceError) as info:
        solve_dual(K, y, 1000.0, tol=1e-12, max_passes=0)
    assert isinstance(info.value.model, TrainedSVM)


def test_record_roundtrip():
    K, y, C = random_problem(6)
    m = solve_dual(K, y, C, sigma=1.0)
    back = TrainedSVM.from_record(m.to_record())
    assert np.array_equal(back.lam, m.lam) and back.bias == m.bias
    assert np.array_equal(decision_values(back, K), decision_values(m, K))


def test_record_version_checked():
    K, y, C = random_problem(6)
    rec = solve_dual(K, y, C).to_record()
    rec["version"] = 99
    with pytest.raises(ShapeError):
        TrainedSVM.from_record(rec)
