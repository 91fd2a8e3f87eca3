"""Exact discrete optimal transport on small instances.

This is the ground-truth route used to validate the stochastic semi-discrete
solver, the post-checks, and the label-preservation experiments: a plain
linear program

    min_gamma sum_ij C_ij gamma_ij   s.t.  gamma 1 = a,  gamma^T 1 = b,  gamma >= 0

solved to optimality with HiGHS. It shares no code with the SGD route.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.spatial.distance import cdist

from ._validation import as_float_array, check_features, check_probability_vector, readonly
from .exceptions import NumericError, ValidationError

DEFAULT_SIZE_CAP = 250_000

_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class TransportPlan:
    """An optimal coupling and its transport cost.

    Attributes:
        coupling: (n, m) non-negative matrix; rows sum to the source weights
            and columns to the sink weights within 1e-9.
        cost: total transport cost, sum(coupling * costs).
        source_potential: optional LP dual values for the row constraints.
        sink_potential: optional LP dual values for the column constraints;
            these double as semi-discrete dual weights over the sink points
            (see :func:`dual_weights`).
    """

    coupling: np.ndarray
    cost: float
    source_potential: np.ndarray | None = None
    sink_potential: np.ndarray | None = None

    def __post_init__(self):
        coupling = as_float_array(self.coupling, "coupling", ndim=2)
        if coupling.min() < -_FEAS_TOL:
            raise ValidationError("coupling has negative entries")
        object.__setattr__(self, "coupling", readonly(np.maximum(coupling, 0.0)))
        if not np.isfinite(self.cost) or self.cost < -_FEAS_TOL:
            raise ValidationError(f"cost must be finite and >= 0, got {self.cost!r}")
        object.__setattr__(self, "cost", float(max(self.cost, 0.0)))


def solve_discrete_ot(costs, a, b, size_cap: int = DEFAULT_SIZE_CAP) -> TransportPlan:
    """Solve the discrete transportation problem to global optimality.

    Args:
        costs: (n, m) finite non-negative cost matrix.
        a: source probability weights, length n.
        b: sink probability weights, length m.
        size_cap: refuse instances with n*m above this (LP blow-up guard).

    Returns:
        A :class:`TransportPlan` with the optimal coupling, its cost, and the
        LP dual potentials.
    """
    costs = as_float_array(costs, "costs", ndim=2)
    if costs.min() < 0:
        raise ValidationError("costs must be non-negative")
    n, m = costs.shape
    if n * m > size_cap:
        raise ValidationError(f"instance size {n}x{m} exceeds cap {size_cap}")
    a = check_probability_vector(a, "a")
    b = check_probability_vector(b, "b")
    if a.shape[0] != n or b.shape[0] != m:
        raise ValidationError(
            f"weight lengths ({a.shape[0]}, {b.shape[0]}) do not match costs {n}x{m}"
        )
    if abs(a.sum() - b.sum()) > _FEAS_TOL:
        raise ValidationError("weight sums differ by more than 1e-9: infeasible")

    row_sums = sparse.kron(sparse.eye(n, format="csr"), np.ones((1, m)), format="csr")
    col_sums = sparse.kron(np.ones((1, n)), sparse.eye(m, format="csr"), format="csr")
    a_eq = sparse.vstack([row_sums, col_sums], format="csr")
    b_eq = np.concatenate([a, b])
    res = linprog(costs.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise NumericError(f"LP solver failed (status {res.status}): {res.message}")

    coupling = res.x.reshape(n, m)
    plan = TransportPlan(
        coupling=coupling,
        cost=float(res.fun),
        source_potential=np.asarray(res.eqlin.marginals[:n], dtype=np.float64),
        sink_potential=np.asarray(res.eqlin.marginals[n:], dtype=np.float64),
    )
    _check_plan(plan, costs, a, b)
    return plan


def _check_plan(plan: TransportPlan, costs, a, b) -> None:
    rows = plan.coupling.sum(axis=1)
    cols = plan.coupling.sum(axis=0)
    if np.abs(rows - a).max() > _FEAS_TOL or np.abs(cols - b).max() > _FEAS_TOL:
        raise NumericError("LP solution violates marginal constraints beyond 1e-9")
    if abs(float((plan.coupling * costs).sum()) - plan.cost) > _FEAS_TOL * max(1.0, plan.cost):
        raise NumericError("LP objective inconsistent with returned coupling")


def dual_weights(plan: TransportPlan) -> np.ndarray:
    """Semi-discrete dual weights over the sink points implied by the LP duals.

    With dual feasibility phi_i + psi_j <= C_ij and tightness on the support,
    phi_i = min_j (C_ij - psi_j): the sink potential itself plays the role of
    the weight vector in the shifted distance C_ij - w_j.
    """
    if plan.sink_potential is None:
        raise ValidationError("plan carries no dual potentials")
    return np.asarray(plan.sink_potential, dtype=np.float64)


def empirical_wasserstein(X, Y, exponent: int = 1) -> float:
    """W_p^p between the uniform empirical measures on two point clouds.

    Computed exactly through :func:`solve_discrete_ot` on the pairwise
    ||x - y||^p cost matrix, p in {1, 2}.
    """
    X = check_features(X, "X")
    Y = check_features(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise ValidationError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if exponent not in (1, 2):
        raise ValidationError("exponent must be 1 or 2")
    costs = cdist(X, Y, "euclidean" if exponent == 1 else "sqeuclidean")
    a = np.full(X.shape[0], 1.0 / X.shape[0])
    b = np.full(Y.shape[0], 1.0 / Y.shape[0])
    return solve_discrete_ot(costs, a, b).cost
