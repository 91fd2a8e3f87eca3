"""Entropic semi-discrete optimal transport via stochastic dual ascent.

Dual weights ``w`` over the prototype points are ascended on the smoothed
semi-discrete dual objective

    L(w) = <w, a> - eps * mean_i log sum_j exp((w_j - ||x_i - z_j||^p) / eps)

whose gradient is ``a - mean_i chi(x_i, w)``, where ``chi`` is the softmax
assignment over Laguerre cells. All exponentials go through log-sum-exp with
max subtraction so regularization down to 1e-8 stays finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist

from ._validation import as_float_array, check_features, check_vector, readonly
from .data import DiscreteMeasure
from .exceptions import NumericError, ValidationError


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters for the dual ascent loop.

    Attributes:
        epsilon: entropic regularization, > 0.
        learning_rate: base ascent step size gamma, > 0.
        max_iter: number of SGD steps to run.
        batch_size: samples per step (clipped to the dataset size).
        cost_exponent: p in the ||x - z||^p ground cost, 1 or 2.
        seed: RNG seed driving batch shuffling.
        warm_start: optional initial dual weight vector (copied).
        tol: early-stop threshold on the marginal residual (0 disables).
        check_every: evaluate the early-stop condition every this many steps.
        lr_decay: step t uses gamma / (1 + lr_decay * t); 0 keeps the step
            size constant.
    """

    epsilon: float = 1e-4
    learning_rate: float = 0.5
    max_iter: int = 1000
    batch_size: int = 64
    cost_exponent: int = 1
    seed: int = 0
    warm_start: np.ndarray | None = None
    tol: float = 1e-4
    check_every: int = 50
    lr_decay: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon!r}")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate!r}")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.cost_exponent not in (1, 2):
            raise ValidationError("cost_exponent must be 1 or 2")
        if self.tol < 0:
            raise ValidationError("tol must be >= 0")
        if self.check_every < 1:
            raise ValidationError("check_every must be >= 1")
        if self.lr_decay < 0:
            raise ValidationError("lr_decay must be >= 0")
        if self.warm_start is not None:
            object.__setattr__(
                self, "warm_start", readonly(as_float_array(self.warm_start, "warm_start", ndim=1))
            )


class TraceRecord(NamedTuple):
    """Per-step diagnostics: full-dataset residual/objective and the step norm.

    ``residual`` and ``objective`` are NaN on records emitted by a standalone
    :func:`sgd_step` (they are whole-dataset quantities); :func:`solve` always
    fills them.
    """

    step: int
    residual: float
    update_norm: float
    objective: float


@dataclass(frozen=True)
class DualState:
    """Dual weights plus the per-step solver trace."""

    weights: np.ndarray
    trace: tuple[TraceRecord, ...] = ()
    step: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "weights", readonly(as_float_array(self.weights, "weights", ndim=1))
        )
        if self.step < 0:
            raise ValidationError("step must be >= 0")


def _points(prototypes) -> np.ndarray:
    points = getattr(prototypes, "points", prototypes)
    return check_features(points, "prototypes")


def _measure(prototypes) -> DiscreteMeasure:
    if not isinstance(prototypes, DiscreteMeasure):
        raise ValidationError("this operation needs a DiscreteMeasure with weights")
    return prototypes


def pairwise_cost(X, Z, exponent: int = 1) -> np.ndarray:
    """Ground cost matrix ||x_i - z_j||^p for p in {1, 2}."""
    X = check_features(X, "X")
    Z = check_features(Z, "Z")
    if X.shape[1] != Z.shape[1]:
        raise ValidationError(f"dimension mismatch: {X.shape[1]} vs {Z.shape[1]}")
    if exponent == 1:
        return cdist(X, Z, "euclidean")
    if exponent == 2:
        return cdist(X, Z, "sqeuclidean")
    raise ValidationError("exponent must be 1 or 2")


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return shifted


def _logsumexp_rows(logits: np.ndarray) -> np.ndarray:
    top = logits.max(axis=1)
    return top + np.log(np.exp(logits - top[:, None]).sum(axis=1))


def smoothed_assignment(x, prototypes, w, epsilon: float, exponent: int = 1) -> np.ndarray:
    """Softmax membership of ``x`` over the smoothed Laguerre cells.

    Entry j is exp((w_j - ||x - z_j||^p) / eps) normalized over j; each row
    sums to 1. Accepts a single d-vector or an (n, d) batch.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be > 0")
    x = as_float_array(x, "x")
    single = x.ndim == 1
    X = x[None, :] if single else x
    Z = _points(prototypes)
    w = check_vector(w, "w", length=Z.shape[0])
    chi = _softmax_rows((w[None, :] - pairwise_cost(X, Z, exponent)) / epsilon)
    if not np.all(np.isfinite(chi)):
        raise NumericError("smoothed assignment produced non-finite values")
    return chi[0] if single else chi


def sgd_step(state: DualState, batch, prototypes, config: SolverConfig) -> DualState:
    """One ascent step ``w += gamma_t * (a - mean_batch chi)`` on a mini-batch.

    Appends the dual update norm to the trace; the residual/objective slots
    stay NaN because they are full-dataset diagnostics (see :func:`solve`).
    """
    measure = _measure(prototypes)
    X = check_features(batch, "batch")
    w = state.weights
    if w.shape[0] != measure.m:
        raise ValidationError(f"state has {w.shape[0]} weights for {measure.m} prototypes")
    chi = smoothed_assignment(X, measure, w, config.epsilon, config.cost_exponent)
    gamma = config.learning_rate / (1.0 + config.lr_decay * state.step)
    move = gamma * (measure.weights - chi.mean(axis=0))
    record = TraceRecord(state.step + 1, float("nan"), float(np.linalg.norm(move)), float("nan"))
    return DualState(weights=w + move, trace=state.trace + (record,), step=state.step + 1)


def dual_objective(targets, prototypes, w, epsilon: float, exponent: int = 1) -> float:
    """Empirical smoothed dual objective L(w) (higher is better)."""
    if epsilon <= 0:
        raise ValidationError("epsilon must be > 0")
    measure = _measure(prototypes)
    X = check_features(targets, "targets")
    w = check_vector(w, "w", length=measure.m)
    logits = (w[None, :] - pairwise_cost(X, measure.points, exponent)) / epsilon
    return float(w @ measure.weights - epsilon * _logsumexp_rows(logits).mean())


def marginal_residual(targets, prototypes, w, epsilon: float, exponent: int = 1) -> float:
    """Euclidean norm of (mean smoothed assignment - prototype weights)."""
    measure = _measure(prototypes)
    X = check_features(targets, "targets")
    chi = smoothed_assignment(X, measure, w, epsilon, exponent)
    return float(np.linalg.norm(chi.mean(axis=0) - measure.weights))


def hard_assign(x, prototypes, w, exponent: int = 1):
    """Index of the prototype minimizing ||x - z_j||^p - w_j (ties: lowest j)."""
    x = as_float_array(x, "x")
    single = x.ndim == 1
    X = x[None, :] if single else x
    Z = _points(prototypes)
    w = check_vector(w, "w", length=Z.shape[0])
    idx = np.argmin(pairwise_cost(X, Z, exponent) - w[None, :], axis=1)
    return int(idx[0]) if single else idx


def transport_cost(targets, prototypes, w, exponent: int = 1) -> float:
    """Mean ||x - z_assigned||^p under the hard Laguerre assignment."""
    X = check_features(targets, "targets")
    Z = _points(prototypes)
    w = check_vector(w, "w", length=Z.shape[0])
    costs = pairwise_cost(X, Z, exponent)
    assigned = np.argmin(costs - w[None, :], axis=1)
    return float(costs[np.arange(X.shape[0]), assigned].mean())


def assignment_sharpness(targets, prototypes, w, epsilon: float,
                         exponent: int = 1) -> tuple[float, float]:
    """Mean Shannon entropy (nats) and mean top1-top2 gap of the assignments."""
    Z = _points(prototypes)
    if Z.shape[0] < 2:
        raise ValidationError("sharpness needs at least 2 prototypes")
    chi = smoothed_assignment(check_features(targets, "targets"), Z, w, epsilon, exponent)
    logs = np.where(chi > 0, np.log(np.where(chi > 0, chi, 1.0)), 0.0)
    entropy = float(-(chi * logs).sum(axis=1).mean())
    top2 = np.sort(chi, axis=1)[:, -2:]
    gap = float((top2[:, 1] - top2[:, 0]).mean())
    return entropy, gap


def solve(targets, prototypes, config: SolverConfig) -> DualState:
    """Run the full stochastic dual ascent loop.

    Batches are drawn without replacement within each epoch and reshuffled
    every epoch from the seeded RNG, so runs are bit-reproducible given the
    same config. After every step the full-dataset marginal residual and dual
    objective are recorded; the loop stops early once the residual drops
    below ``config.tol`` (checked every ``config.check_every`` steps).

    Args:
        targets: (n, d) target features (FeatureTable or array).
        prototypes: DiscreteMeasure of m weighted prototype points.
        config: see :class:`SolverConfig`; ``config.warm_start`` initializes
            the weights (zeros otherwise).

    Returns:
        Final :class:`DualState` with the complete trace.

    Raises:
        NumericError: if the weights leave the finite range, with the step
            index in the message.
    """
    measure = _measure(prototypes)
    X = check_features(targets, "targets")
    if X.shape[1] != measure.d:
        raise ValidationError(f"dimension mismatch: targets {X.shape[1]}, prototypes {measure.d}")
    n, m = X.shape[0], measure.m
    a = measure.weights
    if config.warm_start is not None:
        w = check_vector(config.warm_start, "warm_start", length=m).copy()
    else:
        w = np.zeros(m)

    costs = pairwise_cost(X, measure.points, config.cost_exponent)
    eps = config.epsilon
    batch = min(config.batch_size, n)
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(n)
    cursor = 0

    records: list[TraceRecord] = []
    step = 0
    for step in range(1, config.max_iter + 1):
        if cursor >= n:
            order = rng.permutation(n)
            cursor = 0
        idx = order[cursor:cursor + batch]
        cursor += batch

        gamma = config.learning_rate / (1.0 + config.lr_decay * (step - 1))
        chi_batch = _softmax_rows((w[None, :] - costs[idx]) / eps)
        move = gamma * (a - chi_batch.mean(axis=0))
        w = w + move
        if not np.all(np.isfinite(w)):
            raise NumericError(f"dual weights diverged at step {step}")

        # Full-dataset diagnostics at the updated weights.
        logits = (w[None, :] - costs) / eps
        top = logits.max(axis=1, keepdims=True)
        expd = np.exp(logits - top)
        sums = expd.sum(axis=1, keepdims=True)
        residual = float(np.linalg.norm((expd / sums).mean(axis=0) - a))
        objective = float(w @ a - eps * (top[:, 0] + np.log(sums[:, 0])).mean())
        records.append(TraceRecord(step, residual, float(np.linalg.norm(move)), objective))

        if config.tol > 0 and step % config.check_every == 0 and residual < config.tol:
            break

    return DualState(weights=w, trace=tuple(records), step=step)
