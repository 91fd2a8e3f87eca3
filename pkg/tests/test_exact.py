"""Exact transport oracle vs brute-force enumeration."""

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from otconf import NumericError, ValidationError, empirical_wasserstein, solve_discrete_ot
from otconf.exact import dual_weights

from oracles import best_permutation_cost, brute_force_ot_cost, sorted_matching_w1


def test_identity_matching():
    plan = solve_discrete_ot([[0.0, 1.0], [1.0, 0.0]], [0.5, 0.5], [0.5, 0.5])
    assert plan.cost == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(plan.coupling, np.diag([0.5, 0.5]), atol=1e-9)


def test_forced_assignment():
    plan = solve_discrete_ot([[1.0]], [1.0], [1.0])
    assert plan.cost == pytest.approx(1.0)
    assert plan.coupling[0, 0] == pytest.approx(1.0)


def test_plan_marginals_hold(rng):
    costs = rng.random((5, 7))
    a = rng.random(5)
    a /= a.sum()
    b = rng.random(7)
    b /= b.sum()
    plan = solve_discrete_ot(costs, a, b)
    np.testing.assert_allclose(plan.coupling.sum(axis=1), a, atol=1e-9)
    np.testing.assert_allclose(plan.coupling.sum(axis=0), b, atol=1e-9)
    assert plan.cost == pytest.approx(float((plan.coupling * costs).sum()), abs=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    costs = rng.random((3, 4))
    a = rng.random(3)
    a /= a.sum()
    b = rng.random(4)
    b /= b.sum()
    expected = brute_force_ot_cost(costs, a, b)
    assert solve_discrete_ot(costs, a, b).cost == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("n", [2, 4, 6])
def test_matches_permutation_search_on_uniform_instances(n, rng):
    costs = rng.random((n, n))
    uniform = np.full(n, 1.0 / n)
    expected = best_permutation_cost(costs)
    assert solve_discrete_ot(costs, uniform, uniform).cost == pytest.approx(expected, abs=1e-9)
    # cross-check against an unrelated scipy route
    row, col = linear_sum_assignment(costs)
    assert expected == pytest.approx(costs[row, col].sum() / n, abs=1e-12)


def test_dual_weights_certify_optimality(rng):
    X = rng.normal(size=(12, 3))
    Z = rng.normal(size=(4, 3))
    costs = cdist(X, Z)
    a = np.full(12, 1 / 12)
    b = np.array([0.25, 0.25, 0.25, 0.25])
    plan = solve_discrete_ot(costs, a, b)
    w = dual_weights(plan)
    shifted = costs - w[None, :]
    # every support pair attains the row minimum of the shifted cost
    for i, j in zip(*np.nonzero(plan.coupling > 1e-12)):
        assert shifted[i, j] - shifted[i].min() < 1e-8
    # strong duality with the row potentials
    assert plan.cost == pytest.approx(
        float(a @ plan.source_potential + b @ plan.sink_potential), abs=1e-9)


def test_infeasible_weight_sums():
    with pytest.raises(ValidationError, match="sum"):
        solve_discrete_ot([[1.0]], [1.0], [0.5])


def test_size_cap():
    with pytest.raises(ValidationError, match="cap"):
        solve_discrete_ot(np.zeros((100, 100)), np.full(100, 0.01), np.full(100, 0.01),
                          size_cap=999)


def test_negative_cost_rejected():
    with pytest.raises(ValidationError, match="non-negative"):
        solve_discrete_ot([[-1.0]], [1.0], [1.0])


def test_w1_identical_supports():
    X = np.array([[0.0], [1.0]])
    assert empirical_wasserstein(X, X, 1) == pytest.approx(0.0, abs=1e-12)


def test_w1_single_pair():
    assert empirical_wasserstein([[0.0]], [[3.0]], 1) == pytest.approx(3.0)


def test_w1_sorted_matching_closed_form():
    X = [[0.0], [0.0], [1.0]]
    Y = [[1.0], [1.0], [1.0]]
    assert empirical_wasserstein(X, Y, 1) == pytest.approx(2 / 3, abs=1e-9)
    assert empirical_wasserstein(X, Y, 1) == pytest.approx(
        sorted_matching_w1([0, 0, 1], [1, 1, 1], 1), abs=1e-12)


@pytest.mark.parametrize("exponent", [1, 2])
def test_w1_symmetry_and_identity(rng, exponent):
    X = rng.normal(size=(6, 2))
    Y = rng.normal(size=(9, 2))
    d_xy = empirical_wasserstein(X, Y, exponent)
    d_yx = empirical_wasserstein(Y, X, exponent)
    assert d_xy == pytest.approx(d_yx, abs=1e-9)
    assert empirical_wasserstein(X, X, exponent) == pytest.approx(0.0, abs=1e-9)


def test_w1_1d_matches_sorted_oracle(rng):
    x = rng.normal(size=8)
    y = rng.normal(size=8)
    got = empirical_wasserstein(x[:, None], y[:, None], 1)
    assert got == pytest.approx(sorted_matching_w1(x, y, 1), abs=1e-9)


def test_w1_dimension_mismatch():
    with pytest.raises(ValidationError, match="mismatch"):
        empirical_wasserstein([[0.0]], [[0.0, 1.0]], 1)
