"""Core data types: feature tables, discrete measures, class proportions.

All types are immutable after construction (arrays are read-only copies) and
therefore safe to share across parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_features, check_labels, check_probability_vector, readonly
from .exceptions import ValidationError


@dataclass(frozen=True)
class FeatureTable:
    """An (n, d) matrix of real feature vectors with optional integer labels.

    Attributes:
        features: (n, d) float64 array, every entry finite.
        labels: optional (n,) int64 array of non-negative class ids.
    """

    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        feats = check_features(self.features)
        object.__setattr__(self, "features", readonly(feats))
        if self.labels is not None:
            labels = check_labels(self.labels, n=feats.shape[0])
            object.__setattr__(self, "labels", readonly(labels))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        """Number of classes implied by the labels (max label + 1)."""
        if self.labels is None:
            raise ValidationError("table has no labels")
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class DiscreteMeasure:
    """A finitely supported probability measure: m points with weights.

    Attributes:
        points: (m, d) float64 support points.
        weights: (m,) probability vector; non-negative, sums to 1 within 1e-12
            (sums within 1e-9 of 1 are accepted and renormalized exactly).
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = check_features(self.points, "points")
        weights = check_probability_vector(self.weights, "weights")
        if weights.shape[0] != points.shape[0]:
            raise ValidationError(
                f"weights length {weights.shape[0]} != number of points {points.shape[0]}"
            )
        object.__setattr__(self, "points", readonly(points))
        object.__setattr__(self, "weights", readonly(weights))

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class ClassProportions:
    """A length-K probability vector of class frequencies, K >= 2."""

    proportions: np.ndarray = field()

    def __post_init__(self):
        props = check_probability_vector(self.proportions, "proportions")
        if props.shape[0] < 2:
            raise ValidationError("proportions must cover at least 2 classes")
        object.__setattr__(self, "proportions", readonly(props))

    @property
    def n_classes(self) -> int:
        return self.proportions.shape[0]


def class_means(table: FeatureTable) -> DiscreteMeasure:
    """Collapse a labeled table to per-class mean points weighted by frequency.

    Point j is the arithmetic mean of the rows labeled j; weight j is the
    empirical proportion of label j. Every class in [0, max label] must have
    at least one sample.
    """
    if table.labels is None:
        raise ValidationError("class_means requires a labeled table")
    n_classes = table.n_classes
    counts = np.bincount(table.labels, minlength=n_classes)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise ValidationError(f"class {empty[0]} has no samples")
    means = np.empty((n_classes, table.d), dtype=np.float64)
    for c in range(n_classes):
        means[c] = table.features[table.labels == c].mean(axis=0)
    return DiscreteMeasure(points=means, weights=counts / table.n)


def class_proportions(labels, n_classes: int) -> ClassProportions:
    """Empirical frequency of each class id in [0, n_classes).

    Zero-frequency classes are allowed here (pseudo-labels may miss classes);
    ``class_means`` is the place that rejects them.
    """
    labels = check_labels(labels, "labels")
    if n_classes < 2:
        raise ValidationError("n_classes must be >= 2")
    out_of_range = np.flatnonzero(labels >= n_classes)
    if out_of_range.size:
        i = out_of_range[0]
        raise ValidationError(f"labels[{i}] = {labels[i]} is outside [0, {n_classes})")
    counts = np.bincount(labels, minlength=n_classes)
    return ClassProportions(proportions=counts / labels.shape[0])
