"""Dual ascent solver: assignment formulas, updates, diagnostics, convergence."""

import math

import numpy as np
import pytest
from scipy.spatial.distance import cdist
from scipy.special import softmax

from otconf import (
    NumericError,
    SolverConfig,
    ValidationError,
    assignment_sharpness,
    dual_objective,
    hard_assign,
    marginal_residual,
    sgd_step,
    smoothed_assignment,
    solve,
    solve_discrete_ot,
    transport_cost,
)
from otconf.data import DiscreteMeasure
from otconf.solver import DualState


def quartile_instance():
    prototypes = DiscreteMeasure(points=[[0.0], [2.0]], weights=[0.25, 0.75])
    targets = np.array([[0.4], [0.6], [0.8], [1.0]])
    return targets, prototypes


def two_cluster_instance(rng, n=60, gap=6.0):
    X = np.vstack([rng.normal(0.0, 0.4, (n, 2)),
                   rng.normal([gap, 0.0], 0.4, (n, 2))])
    prototypes = DiscreteMeasure(points=[[0.0, 0.0], [gap, 0.0]], weights=[0.5, 0.5])
    return X, prototypes


class TestSmoothedAssignment:
    def test_uniform_under_symmetry(self):
        chi = smoothed_assignment([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]],
                                  np.zeros(3), epsilon=0.5)
        np.testing.assert_allclose(chi, np.full(3, 1 / 3), atol=1e-15)

    def test_two_point_value(self):
        # distances (1, 2), zero weights, epsilon 1: softmax(-1, -2)
        chi = smoothed_assignment([0.0], [[1.0], [2.0]], np.zeros(2), epsilon=1.0)
        np.testing.assert_allclose(chi, [0.7311, 0.2689], atol=5e-5)
        np.testing.assert_allclose(chi, softmax([-1.0, -2.0]), atol=1e-15)

    def test_zero_temperature_one_hot(self):
        chi = smoothed_assignment([0.3], [[0.0], [2.0], [5.0]], [0.0, 1.5, 0.0],
                                  epsilon=1e-12)
        # argmin of |x-z| - w is index 1 (2 - 0.3 - 1.5 = 0.2 < 0.3)
        np.testing.assert_allclose(chi, [0.0, 1.0, 0.0], atol=1e-12)

    def test_rows_sum_to_one(self, rng):
        X = rng.normal(size=(40, 3)) * 5
        Z = rng.normal(size=(7, 3))
        w = rng.normal(size=7)
        for eps in (1e-8, 1e-4, 1e-1, 1.0):
            chi = smoothed_assignment(X, Z, w, epsilon=eps)
            np.testing.assert_allclose(chi.sum(axis=1), np.ones(40), atol=1e-12)
            assert chi.min() >= 0

    def test_epsilon_must_be_positive(self):
        with pytest.raises(ValidationError):
            smoothed_assignment([0.0], [[1.0]], [0.0], epsilon=0.0)


class TestSgdStep:
    def test_zero_gradient_keeps_weights(self):
        prototypes = DiscreteMeasure(points=[[-1.0, 0.0], [1.0, 0.0]], weights=[0.5, 0.5])
        batch = np.array([[0.0, 2.0], [0.0, -2.0]])
        state = DualState(weights=np.zeros(2))
        new = sgd_step(state, batch, prototypes, SolverConfig(epsilon=1.0, learning_rate=1.0))
        np.testing.assert_array_equal(new.weights, state.weights)
        assert new.trace[-1].update_norm == 0.0
        assert new.step == 1

    def test_update_rule_arithmetic(self):
        # near-zero temperature: 4 of 5 samples one-hot on prototype 0,
        # so the batch mean assignment is exactly (0.8, 0.2)
        prototypes = DiscreteMeasure(points=[[0.0], [10.0]], weights=[0.5, 0.5])
        batch = np.array([[0.0], [1.0], [2.0], [3.0], [10.0]])
        state = DualState(weights=np.zeros(2))
        cfg = SolverConfig(epsilon=1e-12, learning_rate=1.0)
        new = sgd_step(state, batch, prototypes, cfg)
        np.testing.assert_allclose(new.weights, [-0.3, 0.3], atol=1e-12)

    def test_matches_independent_softmax(self, rng):
        prototypes = DiscreteMeasure(points=rng.normal(size=(4, 2)),
                                     weights=[0.1, 0.2, 0.3, 0.4])
        batch = rng.normal(size=(9, 2))
        w = rng.normal(size=4)
        cfg = SolverConfig(epsilon=0.3, learning_rate=0.7)
        new = sgd_step(DualState(weights=w), batch, prototypes, cfg)
        logits = (w[None, :] - cdist(batch, prototypes.points)) / 0.3
        expected = w + 0.7 * (prototypes.weights - softmax(logits, axis=1).mean(axis=0))
        np.testing.assert_allclose(new.weights, expected, atol=1e-12)

    def test_full_batch_ascent_is_monotone(self, rng):
        # gamma <= epsilon keeps plain gradient ascent inside the stable regime
        X, prototypes = two_cluster_instance(rng, n=15)
        eps = 0.1
        cfg = SolverConfig(epsilon=eps, learning_rate=eps)
        state = DualState(weights=np.zeros(2))
        previous = dual_objective(X, prototypes, state.weights, eps)
        for _ in range(150):
            state = sgd_step(state, X, prototypes, cfg)
            current = dual_objective(X, prototypes, state.weights, eps)
            assert current >= previous - 1e-12 * max(1.0, abs(previous))
            previous = current


class TestDualObjective:
    def test_single_prototype_closed_form(self, rng):
        X = rng.normal(size=(25, 3))
        z = rng.normal(size=(1, 3))
        prototypes = DiscreteMeasure(points=z, weights=[1.0])
        expected = float(cdist(X, z).mean())
        for w in (0.0, -3.0, 7.5):
            got = dual_objective(X, prototypes, [w], epsilon=1e-3)
            assert got == pytest.approx(expected, abs=1e-9)

    def test_constant_shift_cancels(self, rng):
        X, prototypes = two_cluster_instance(rng, n=10)
        w = rng.normal(size=2)
        base = dual_objective(X, prototypes, w, epsilon=0.05)
        shifted = dual_objective(X, prototypes, w + 11.25, epsilon=0.05)
        assert shifted == pytest.approx(base, abs=1e-9)

    def test_matched_supports_vanishing_epsilon(self):
        points = np.array([[0.0, 0.0], [3.0, 1.0]])
        prototypes = DiscreteMeasure(points=points, weights=[0.5, 0.5])
        value = dual_objective(points, prototypes, np.zeros(2), epsilon=1e-9)
        assert abs(value) < 1e-8


class TestMarginalResidual:
    def test_single_prototype_is_exact(self, rng):
        prototypes = DiscreteMeasure(points=[[0.0, 0.0]], weights=[1.0])
        assert marginal_residual(rng.normal(size=(10, 2)), prototypes, [0.0], 1e-4) == 0.0

    def test_symmetric_balanced_instance(self, rng):
        X, prototypes = two_cluster_instance(rng)
        assert marginal_residual(X, prototypes, np.zeros(2), 1e-4) < 1e-6

    def test_solved_quartile_instance(self):
        targets, prototypes = quartile_instance()
        state = solve(targets, prototypes,
                      SolverConfig(epsilon=1e-4, learning_rate=0.2, max_iter=200,
                                   batch_size=4, seed=0))
        assert marginal_residual(targets, prototypes, state.weights, 1e-4) < 1e-3


class TestSolve:
    def test_symmetric_instance_equalizes_weights(self, rng):
        X, prototypes = two_cluster_instance(rng, n=50)
        state = solve(X, prototypes,
                      SolverConfig(learning_rate=0.3, max_iter=500, batch_size=100, seed=1))
        assert abs(state.weights[0] - state.weights[1]) < 1e-6

    def test_quartile_instance_matches_exact_oracle(self):
        targets, prototypes = quartile_instance()
        state = solve(targets, prototypes,
                      SolverConfig(epsilon=1e-4, learning_rate=0.2, max_iter=300,
                                   batch_size=4, seed=0))
        assigned = hard_assign(targets, prototypes, state.weights)
        np.testing.assert_array_equal(assigned, [0, 1, 1, 1])
        cost = transport_cost(targets, prototypes, state.weights)
        assert cost == pytest.approx(1.0, abs=1e-9)
        oracle = solve_discrete_ot(cdist(targets, prototypes.points),
                                   np.full(4, 0.25), prototypes.weights)
        assert cost == pytest.approx(oracle.cost, rel=1e-9)

    def test_matched_supports_cost_vanishes(self):
        points = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
        prototypes = DiscreteMeasure(points=points, weights=np.full(3, 1 / 3))
        state = solve(points, prototypes,
                      SolverConfig(learning_rate=0.2, max_iter=200, batch_size=3, seed=0))
        assert transport_cost(points, prototypes, state.weights) < 1e-6

    def test_deterministic_trace_per_seed(self, rng):
        X, prototypes = two_cluster_instance(rng, n=30)
        cfg = SolverConfig(learning_rate=0.3, max_iter=120, batch_size=16, seed=9, tol=0.0)
        first = solve(X, prototypes, cfg)
        second = solve(X, prototypes, cfg)
        assert np.array_equal(first.weights, second.weights)
        assert first.trace == second.trace
        different = solve(X, prototypes,
                          SolverConfig(learning_rate=0.3, max_iter=120, batch_size=16,
                                       seed=10, tol=0.0))
        assert not np.array_equal(first.weights, different.weights)

    def test_early_stop_and_trace_length(self):
        targets, prototypes = quartile_instance()
        cfg = SolverConfig(epsilon=1e-4, learning_rate=0.2, max_iter=500, batch_size=4,
                           seed=0, tol=1e-4, check_every=50)
        state = solve(targets, prototypes, cfg)
        assert state.step == 50
        assert len(state.trace) == 50 <= cfg.max_iter
        assert state.trace[-1].residual < 1e-4

    def test_warm_start_honored(self):
        targets, prototypes = quartile_instance()
        cfg = SolverConfig(epsilon=1e-4, learning_rate=0.2, max_iter=300, batch_size=4, seed=0)
        solved = solve(targets, prototypes, cfg)
        restarted = solve(targets, prototypes,
                          SolverConfig(epsilon=1e-4, learning_rate=0.2, max_iter=50,
                                       batch_size=4, seed=1, warm_start=solved.weights))
        assert restarted.trace[0].residual < 1e-6

    def test_divergence_reports_step(self):
        targets, prototypes = quartile_instance()
        cfg = SolverConfig(epsilon=1e-4, learning_rate=0.2, max_iter=10, batch_size=4,
                           seed=0, warm_start=[1e308, 0.0])
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NumericError, match="step 1"):
                solve(targets, prototypes, cfg)

    def test_dimension_mismatch(self):
        prototypes = DiscreteMeasure(points=[[0.0, 1.0]], weights=[1.0])
        with pytest.raises(ValidationError, match="mismatch"):
            solve(np.zeros((3, 3)), prototypes, SolverConfig())


class TestHardAssign:
    def test_zero_weights_nearest(self):
        idx = hard_assign([0.2], [[0.0], [1.0]], np.zeros(2))
        assert idx == 0

    def test_tie_breaks_to_lowest_index(self):
        # prototypes 1 and 3 are exactly equidistant from x
        prototypes = np.array([[9.0, 9.0], [0.0, 1.0], [9.0, -9.0], [0.0, -1.0]])
        assert hard_assign([5.0, 0.0], prototypes, np.zeros(4)) == 1

    def test_weights_move_the_boundary(self):
        assert hard_assign([0.9], [[0.0], [2.0]], [0.0, 0.0]) == 0
        assert hard_assign([0.9], [[0.0], [2.0]], [0.0, 1.0]) == 1


class TestTransportCost:
    def test_matched_supports(self):
        points = np.array([[0.0], [1.0]])
        assert transport_cost(points, points, np.zeros(2)) == 0.0

    def test_single_prototype_mean_distance(self, rng):
        X = rng.normal(size=(20, 2))
        z = np.zeros((1, 2))
        for exponent in (1, 2):
            expected = float((np.linalg.norm(X, axis=1) ** exponent).mean())
            assert transport_cost(X, z, [0.0], exponent) == pytest.approx(expected, abs=1e-12)


class TestAssignmentSharpness:
    def test_uniform_degenerate(self):
        # all prototypes equidistant, equal weights: entropy ln m, zero gap
        prototypes = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        entropy, gap = assignment_sharpness(np.zeros((5, 2)), prototypes, np.zeros(4),
                                            epsilon=1.0)
        assert entropy == pytest.approx(math.log(4), abs=1e-12)
        assert gap == pytest.approx(0.0, abs=1e-12)

    def test_three_quarters_split(self):
        # chi = (0.75, 0.25) for every sample via the weight offset ln 3
        prototypes = np.array([[0.0, 1.0], [0.0, -1.0]])
        X = np.column_stack([np.linspace(-2, 2, 9), np.zeros(9)])
        entropy, gap = assignment_sharpness(X, prototypes, [math.log(3.0), 0.0],
                                            epsilon=1.0)
        assert entropy == pytest.approx(0.5623, abs=5e-5)
        assert entropy == pytest.approx(0.5623351446188083, abs=1e-12)
        assert gap == pytest.approx(0.5, abs=1e-12)

    def test_hard_regime_on_separated_clusters(self, rng):
        X, prototypes = two_cluster_instance(rng, n=40)
        entropy, gap = assignment_sharpness(X, prototypes, np.zeros(2), epsilon=1e-8)
        assert entropy < 0.01
        assert gap > 0.99

    def test_needs_two_prototypes(self):
        with pytest.raises(ValidationError):
            assignment_sharpness(np.zeros((2, 1)), np.zeros((1, 1)), [0.0], 1e-2)


class TestShiftInvariance:
    def test_all_quantities_invariant_under_constant_shift(self, rng):
        X = rng.normal(size=(30, 2)) * 3
        prototypes = DiscreteMeasure(points=rng.normal(size=(5, 2)),
                                     weights=[0.1, 0.2, 0.3, 0.2, 0.2])
        w = rng.normal(size=5)
        for shift in (-4.0, 0.37, 12.0):
            shifted = w + shift
            np.testing.assert_allclose(
                smoothed_assignment(X, prototypes, shifted, 1e-2),
                smoothed_assignment(X, prototypes, w, 1e-2), atol=1e-9)
            np.testing.assert_array_equal(
                hard_assign(X, prototypes, shifted), hard_assign(X, prototypes, w))
            assert transport_cost(X, prototypes, shifted) == pytest.approx(
                transport_cost(X, prototypes, w), abs=1e-12)
            assert marginal_residual(X, prototypes, shifted, 1e-2) == pytest.approx(
                marginal_residual(X, prototypes, w, 1e-2), abs=1e-9)
            assert dual_objective(X, prototypes, shifted, 1e-2) == pytest.approx(
                dual_objective(X, prototypes, w, 1e-2), abs=1e-8)


def test_solver_config_validation():
    with pytest.raises(ValidationError):
        SolverConfig(epsilon=0.0)
    with pytest.raises(ValidationError):
        SolverConfig(learning_rate=-1.0)
    with pytest.raises(ValidationError):
        SolverConfig(max_iter=0)
    with pytest.raises(ValidationError):
        SolverConfig(batch_size=0)
    with pytest.raises(ValidationError):
        SolverConfig(cost_exponent=3)
