"""Sklearn-style estimators wrapping the functional solver and scorer.

Both classes follow the fit/transform/predict + get_params conventions so
they compose with pipelines, cloning, and grid search. Hyperparameters mirror
:class:`~otconf.solver.SolverConfig`; data (targets, prototypes, labels) is
passed to ``fit``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features, check_labels
from .data import DiscreteMeasure, FeatureTable, class_means, class_proportions
from .exceptions import ValidationError
from .scoring import ot_scores, score_report
from .solver import SolverConfig, dual_objective, hard_assign, smoothed_assignment, solve


class _SolverParamsMixin:
    def _config(self, warm_start=None) -> SolverConfig:
        return SolverConfig(
            epsilon=self.epsilon,
            learning_rate=self.learning_rate,
            max_iter=self.max_iter,
            batch_size=self.batch_size,
            cost_exponent=self.cost_exponent,
            seed=self.random_state,
            warm_start=warm_start,
            tol=self.tol,
            check_every=self.check_every,
            lr_decay=self.lr_decay,
        )


def _as_measure(prototypes, prototype_weights) -> DiscreteMeasure:
    if isinstance(prototypes, DiscreteMeasure):
        if prototype_weights is not None:
            raise ValidationError("pass weights inside the DiscreteMeasure, not separately")
        return prototypes
    points = check_features(prototypes, "prototypes")
    if prototype_weights is None:
        prototype_weights = np.full(points.shape[0], 1.0 / points.shape[0])
    return DiscreteMeasure(points=points, weights=prototype_weights)


class SemiDiscreteTransport(_SolverParamsMixin, BaseEstimator):
    """Entropic semi-discrete transport onto weighted prototype points.

    ``fit(X, prototypes=...)`` ascends the dual weights so the smoothed cell
    masses of X match the prototype weights; ``transform`` returns soft cell
    memberships and ``predict`` hard prototype assignments.

    Fitted attributes: ``prototypes_`` (DiscreteMeasure), ``dual_weights_``,
    ``trace_``, ``n_iter_``.
    """

    def __init__(self, epsilon=1e-4, learning_rate=0.5, max_iter=1000, batch_size=64,
                 cost_exponent=1, tol=1e-4, check_every=50, lr_decay=0.0, random_state=0):
        self.epsilon = epsilon
        self.learning_rate = learning_rate
        self.max_iter = max_iter
        self.batch_size = batch_size
        self.cost_exponent = cost_exponent
        self.tol = tol
        self.check_every = check_every
        self.lr_decay = lr_decay
        self.random_state = random_state

    def fit(self, X, y=None, *, prototypes=None, prototype_weights=None, warm_start=None):
        """Solve the dual between the samples X and the prototype measure."""
        if prototypes is None:
            raise ValidationError("fit requires prototypes= (points or a DiscreteMeasure)")
        measure = _as_measure(prototypes, prototype_weights)
        state = solve(X, measure, self._config(warm_start))
        self.prototypes_ = measure
        self.dual_weights_ = state.weights
        self.trace_ = state.trace
        self.n_iter_ = state.step
        return self

    def transform(self, X) -> np.ndarray:
        """Soft cell memberships, one row per sample, rows sum to 1."""
        check_is_fitted(self, "dual_weights_")
        return smoothed_assignment(X, self.prototypes_, self.dual_weights_,
                                   self.epsilon, self.cost_exponent)

    def predict(self, X) -> np.ndarray:
        """Hard prototype index per sample."""
        check_is_fitted(self, "dual_weights_")
        return hard_assign(check_features(X), self.prototypes_, self.dual_weights_,
                           self.cost_exponent)

    def score(self, X, y=None) -> float:
        """Dual objective on X (higher means better marginal fit)."""
        check_is_fitted(self, "dual_weights_")
        return dual_objective(X, self.prototypes_, self.dual_weights_,
                              self.epsilon, self.cost_exponent)


class OTConfidenceScorer(_SolverParamsMixin, BaseEstimator):
    """End-to-end confidence scoring of pseudo-labeled samples.

    ``fit(X, y)`` takes target features and their pseudo-labels, builds
    class-mean prototypes from ``source_features``/``source_labels`` (or uses
    explicit ``prototypes``), weights them by the pseudo-label proportions,
    solves the transport dual, and scores every sample. ``score_samples``
    evaluates new samples under the frozen dual; ``predict`` returns the
    transport-induced class.

    Fitted attributes: ``prototypes_``, ``prototype_labels_``,
    ``dual_weights_``, ``report_``, ``scores_``, ``trace_``, ``n_iter_``.
    """

    def __init__(self, epsilon=1e-4, learning_rate=0.5, max_iter=1000, batch_size=64,
                 cost_exponent=1, tol=1e-4, check_every=50, lr_decay=0.0, random_state=0):
        self.epsilon = epsilon
        self.learning_rate = learning_rate
        self.max_iter = max_iter
        self.batch_size = batch_size
        self.cost_exponent = cost_exponent
        self.tol = tol
        self.check_every = check_every
        self.lr_decay = lr_decay
        self.random_state = random_state

    def fit(self, X, y, *, source_features=None, source_labels=None,
            prototypes=None, prototype_labels=None):
        X = check_features(X, "X")
        y = check_labels(y, "y", n=X.shape[0])
        if prototypes is not None:
            points = getattr(prototypes, "points", prototypes)
            points = check_features(points, "prototypes")
            if prototype_labels is None:
                prototype_labels = np.arange(points.shape[0])
            prototype_labels = check_labels(prototype_labels, "prototype_labels",
                                            n=points.shape[0])
        elif source_features is not None:
            if source_labels is None:
                raise ValidationError("source_features requires source_labels")
            means = class_means(FeatureTable(features=source_features, labels=source_labels))
            points = means.points
            prototype_labels = np.arange(points.shape[0])
        else:
            raise ValidationError("fit requires prototypes= or source_features=/source_labels=")

        n_classes = int(prototype_labels.max()) + 1
        proportions = class_proportions(y, n_classes).proportions
        counts = np.bincount(prototype_labels, minlength=n_classes)
        weights = proportions[prototype_labels] / counts[prototype_labels]
        measure = DiscreteMeasure(points=points, weights=weights)

        state = solve(X, measure, self._config())
        self.prototypes_ = measure
        self.prototype_labels_ = prototype_labels
        self.classes_ = np.arange(n_classes)
        self.dual_weights_ = state.weights
        self.trace_ = state.trace
        self.n_iter_ = state.step
        self.report_ = score_report(X, y, measure, state.weights, self.cost_exponent,
                                    prototype_labels=prototype_labels)
        self.scores_ = self.report_.scores
        return self

    def score_samples(self, X, y) -> np.ndarray:
        """Confidence scores of (possibly new) samples with pseudo-labels y."""
        check_is_fitted(self, "dual_weights_")
        return ot_scores(X, y, self.prototypes_, self.dual_weights_,
                         self.cost_exponent, prototype_labels=self.prototype_labels_)

    def predict(self, X) -> np.ndarray:
        """Class of the prototype each sample is transported to."""
        check_is_fitted(self, "dual_weights_")
        idx = hard_assign(check_features(X), self.prototypes_, self.dual_weights_,
                          self.cost_exponent)
        return self.prototype_labels_[np.atleast_1d(idx)]

    def score(self, X, y) -> float:
        """Mean confidence score of (X, y); the label-free model proxy."""
        return float(self.score_samples(X, y).mean())
