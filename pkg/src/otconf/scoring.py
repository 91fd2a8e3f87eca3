"""Confidence scores from solved dual weights, plus the post-check machinery.

The per-sample score of a target ``x`` pseudo-labeled ``i`` is

    g(x) = min_{j != i}  d~(x, class j) - d~(x, class i)

where ``d~(x, z) = ||x - z||^p - w_z`` is the dual-shifted distance and the
class distance is the minimum over that class's prototype points. Large g
means reassigning x to any other class costs more under the transport
geometry, i.e. the pseudo-label is safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_float_array, check_features, check_labels, check_vector, readonly
from .data import DiscreteMeasure
from .exceptions import ValidationError
from .solver import marginal_residual, pairwise_cost


def shifted_distance(x, j: int, prototypes, w, exponent: int = 1) -> float:
    """Dual-shifted distance ||x - z_j||^p - w_j to a single prototype."""
    x = as_float_array(x, "x", ndim=1)
    points = getattr(prototypes, "points", prototypes)
    points = check_features(points, "prototypes")
    w = check_vector(w, "w", length=points.shape[0])
    if not 0 <= j < points.shape[0]:
        raise ValidationError(f"prototype index {j} out of range [0, {points.shape[0]})")
    return float(pairwise_cost(x[None, :], points[j:j + 1], exponent)[0, 0] - w[j])


def _class_shifted(X, prototypes, w, exponent, prototype_labels):
    """(n, K) matrix of min-over-class shifted distances."""
    points = getattr(prototypes, "points", prototypes)
    points = check_features(points, "prototypes")
    m = points.shape[0]
    w = check_vector(w, "w", length=m)
    if prototype_labels is None:
        labels = np.arange(m)
    else:
        labels = check_labels(prototype_labels, "prototype_labels", n=m)
    n_classes = int(labels.max()) + 1
    counts = np.bincount(labels, minlength=n_classes)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise ValidationError(f"prototype class {empty[0]} has no points")
    shifted = pairwise_cost(X, points, exponent) - w[None, :]
    out = np.empty((X.shape[0], n_classes))
    for c in range(n_classes):
        out[:, c] = shifted[:, labels == c].min(axis=1)
    return out


def ot_scores(targets, pseudo_labels, prototypes, w, exponent: int = 1,
              prototype_labels=None) -> np.ndarray:
    """Vector of confidence scores, one per target sample.

    ``prototype_labels`` maps each prototype point to a class for
    multi-point-per-class supports; by default prototype j is class j.
    """
    X = check_features(targets, "targets")
    pseudo = check_labels(pseudo_labels, "pseudo_labels", n=X.shape[0])
    by_class = _class_shifted(X, prototypes, w, exponent, prototype_labels)
    n_classes = by_class.shape[1]
    if n_classes < 2:
        raise ValidationError("scoring needs at least 2 classes")
    if pseudo.max() >= n_classes:
        bad = int(np.flatnonzero(pseudo >= n_classes)[0])
        raise ValidationError(f"pseudo_labels[{bad}] is outside [0, {n_classes})")
    rows = np.arange(X.shape[0])
    own = by_class[rows, pseudo]
    others = by_class.copy()
    others[rows, pseudo] = np.inf
    return others.min(axis=1) - own


def ot_score(x, pseudo_label: int, prototypes, w, exponent: int = 1,
             prototype_labels=None) -> float:
    """Confidence score of a single sample; see :func:`ot_scores`."""
    x = as_float_array(x, "x", ndim=1)
    return float(ot_scores(x[None, :], [pseudo_label], prototypes, w, exponent,
                           prototype_labels)[0])


@dataclass(frozen=True)
class ScoreReport:
    """Per-sample scores plus batch aggregates.

    Attributes:
        scores: (n,) finite confidence scores.
        pseudo_labels: (n,) class ids the scores were computed against.
        normalized: optional min-max normalized scores in [0, 1].
        mean_score: arithmetic mean of ``scores`` (derived).
        per_class_extrema: {class: (min, max) of scores} for present classes
            (derived).
    """

    scores: np.ndarray
    pseudo_labels: np.ndarray
    normalized: np.ndarray | None = None
    mean_score: float = field(init=False)
    per_class_extrema: dict[int, tuple[float, float]] = field(init=False)

    def __post_init__(self):
        scores = as_float_array(self.scores, "scores", ndim=1)
        if scores.size == 0:
            raise ValidationError("scores must be non-empty")
        labels = check_labels(self.pseudo_labels, "pseudo_labels", n=scores.shape[0])
        object.__setattr__(self, "scores", readonly(scores))
        object.__setattr__(self, "pseudo_labels", readonly(labels))
        if self.normalized is not None:
            norm = check_vector(self.normalized, "normalized", length=scores.shape[0])
            if norm.min() < 0 or norm.max() > 1:
                raise ValidationError("normalized scores must lie in [0, 1]")
            object.__setattr__(self, "normalized", readonly(norm))
        object.__setattr__(self, "mean_score", float(scores.mean()))
        extrema = {}
        for c in np.unique(labels):
            sub = scores[labels == c]
            extrema[int(c)] = (float(sub.min()), float(sub.max()))
        object.__setattr__(self, "per_class_extrema", extrema)


def score_report(targets, pseudo_labels, prototypes, w, exponent: int = 1,
                 prototype_labels=None, normalize: bool = True) -> ScoreReport:
    """Score every sample and assemble the aggregate report."""
    scores = ot_scores(targets, pseudo_labels, prototypes, w, exponent, prototype_labels)
    normalized = normalize_and_reweight(scores)[0] if normalize else None
    return ScoreReport(scores=scores, pseudo_labels=np.asarray(pseudo_labels), normalized=normalized)


def mean_score(report) -> float:
    """Mean confidence score over a report (or a plain score vector)."""
    scores = getattr(report, "scores", report)
    scores = as_float_array(scores, "scores", ndim=1)
    if scores.size == 0:
        raise ValidationError("scores must be non-empty")
    return float(scores.mean())


def score_gap(report: ScoreReport, class_a: int, class_b: int) -> float:
    """Two-class decision-boundary flexibility gap from a score report.

    Computed as ``min(scores | class_a) + min(scores | class_b)``. For binary
    reports this equals the signed-score gap inf over one class minus sup
    over the other, because a sample's score flips sign with its pseudo-label;
    with more classes it is a conservative lower bound restricted to the pair.
    Positive values certify slack in the induced decision boundary.
    """
    for c in (class_a, class_b):
        if c not in report.per_class_extrema:
            raise ValidationError(f"class {c} has no samples in the report")
    return report.per_class_extrema[class_a][0] + report.per_class_extrema[class_b][0]


@dataclass(frozen=True)
class PostCheckResult:
    """Outcome of a label-preservation inequality check.

    ``left_margin`` is the sup over class-1 samples and ``right_margin`` the
    inf over class-2 samples of the max-min expression; ``gap`` is their
    difference. The joint form holds iff left <= 0 <= right; the
    component-wise form holds iff gap >= 0.
    """

    holds: bool
    left_margin: float
    right_margin: float
    gap: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "gap", float(self.right_margin) - float(self.left_margin))


def _two_block_expression(X, proto1, proto2, w1, w2, exponent):
    d1 = pairwise_cost(X, proto1, exponent) - w1[None, :]
    d2 = pairwise_cost(X, proto2, exponent) - w2[None, :]
    return d1.min(axis=1) - d2.min(axis=1)


def postcheck_binary(class1_samples, class2_samples, proto1, proto2, w,
                     exponent: int = 1) -> PostCheckResult:
    """Joint-dual label-preservation check for a binary split.

    ``w`` is a single dual weight vector covering the class-1 prototype block
    followed by the class-2 block. The optimal transport preserves the split
    iff every class-1 sample is shifted-closer to the class-1 prototypes and
    symmetrically for class 2, i.e. left_margin <= 0 <= right_margin.
    """
    X1 = check_features(class1_samples, "class1_samples")
    X2 = check_features(class2_samples, "class2_samples")
    p1 = check_features(getattr(proto1, "points", proto1), "proto1")
    p2 = check_features(getattr(proto2, "points", proto2), "proto2")
    w = check_vector(w, "w", length=p1.shape[0] + p2.shape[0])
    w1, w2 = w[:p1.shape[0]], w[p1.shape[0]:]
    left = float(_two_block_expression(X1, p1, p2, w1, w2, exponent).max())
    right = float(_two_block_expression(X2, p1, p2, w1, w2, exponent).min())
    return PostCheckResult(holds=bool(left <= 0.0 <= right), left_margin=left,
                           right_margin=right)


def postcheck_componentwise(class1_samples, class2_samples,
                            proto1: DiscreteMeasure, proto2: DiscreteMeasure,
                            m_weights, l_weights, exponent: int = 1,
                            epsilon: float = 1e-4,
                            residual_tol: float = 1e-2) -> PostCheckResult:
    """Label-preservation check from two per-class dual solves.

    ``m_weights`` must solve the semi-discrete problem (class-1 samples ->
    proto1) and ``l_weights`` the class-2 one; that precondition is asserted
    by requiring both marginal residuals below ``residual_tol``. Holds iff
    left_margin <= right_margin (the two vectors are each defined only up to
    an additive constant, so there is no absolute zero between them).
    """
    X1 = check_features(class1_samples, "class1_samples")
    X2 = check_features(class2_samples, "class2_samples")
    m_weights = check_vector(m_weights, "m_weights", length=proto1.m)
    l_weights = check_vector(l_weights, "l_weights", length=proto2.m)
    for name, X, proto, weights in (("m_weights", X1, proto1, m_weights),
                                    ("l_weights", X2, proto2, l_weights)):
        res = marginal_residual(X, proto, weights, epsilon, exponent)
        if res >= residual_tol:
            raise ValidationError(
                f"{name} does not solve its per-class problem: residual {res:.3g} "
                f">= {residual_tol:g}"
            )
    left = float(_two_block_expression(X1, proto1.points, proto2.points,
                                       m_weights, l_weights, exponent).max())
    right = float(_two_block_expression(X2, proto1.points, proto2.points,
                                        m_weights, l_weights, exponent).min())
    return PostCheckResult(holds=bool(left <= right), left_margin=left, right_margin=right)


def normalize_and_reweight(scores, companion=None) -> tuple[np.ndarray, np.ndarray]:
    """Min-max normalize scores to [0, 1] and form training weights.

    Weights are ``2 * normalized * companion`` when a companion confidence in
    [0, 1] is supplied (the factor 2 offsets the range compression of the
    product), else ``2 * normalized``. A degenerate score range maps to all
    ones. Weights are returned unclamped.
    """
    scores = as_float_array(scores, "scores", ndim=1)
    if scores.size == 0:
        raise ValidationError("scores must be non-empty")
    lo, hi = float(scores.min()), float(scores.max())
    if hi > lo:
        normalized = (scores - lo) / (hi - lo)
    else:
        normalized = np.ones_like(scores)
    if companion is None:
        return normalized, 2.0 * normalized
    companion = check_vector(companion, "companion", length=scores.shape[0])
    if companion.min() < 0 or companion.max() > 1:
        raise ValidationError("companion scores must lie in [0, 1]")
    return normalized, 2.0 * normalized * companion


# -- misclassification bound --------------------------------------------------


def _surface_coordinate(r: float, separation: float, shift: float) -> float:
    """Axis coordinate t(r) where ||x|| - ||x - d e|| = shift at radius r.

    The left side is strictly increasing in t, so bisection on an expanding
    bracket finds the unique root.
    """

    def f(t: float) -> float:
        return math.hypot(t, r) - math.hypot(t - separation, r) - shift

    lo, hi = 0.0, separation
    while f(lo) > 0:
        lo -= separation
    while f(hi) < 0:
        hi += separation
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-13 * max(1.0, separation):
            break
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _distance_to_surface(alpha: float, rho: float, separation: float, shift: float) -> float:
    """Distance from a point (alpha, rho) to the shifted equidistance surface.

    Golden-section over the radial coordinate r on [0, rho + 10 * separation];
    the minimizer is unique.
    """

    def objective(r: float) -> float:
        t = _surface_coordinate(r, separation, shift)
        return (t - alpha) ** 2 + (r - rho) ** 2

    lo, hi = 0.0, rho + 10.0 * separation
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = objective(c), objective(d)
    while hi - lo > 1e-8:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = objective(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = objective(d)
    return math.sqrt(objective(0.5 * (lo + hi)))


def misclassification_bound(f1, f2, w_star: float, g: float, m1, m2,
                            sigma: float) -> float:
    """Upper bound on misclassifying samples scoring above ``g``.

    For two point prototypes f1, f2 with dual gap ``w_star`` and subgaussian
    class clouds of scale ``sigma`` centered at m1, m2, the assignment flips
    only across the surface ||x - f1|| - (w_star + g) = ||x - f2||; the bound
    is 2 exp(-min_i dist(m_i, S)^2 / (2 sigma^2)), capped at 1.

    Requires the crossing hypothesis
    ||m1 - f1|| + ||m2 - f2|| < ||m1 - f2|| + ||m2 - f1||, and
    |w_star + g| < ||f2 - f1|| so the surface exists between the prototypes.
    """
    f1 = as_float_array(f1, "f1", ndim=1)
    f2 = as_float_array(f2, "f2", ndim=1)
    m1 = as_float_array(m1, "m1", ndim=1)
    m2 = as_float_array(m2, "m2", ndim=1)
    if not (f1.shape == f2.shape == m1.shape == m2.shape):
        raise ValidationError("f1, f2, m1, m2 must share one dimension")
    if sigma <= 0:
        raise ValidationError("sigma must be > 0")
    straight = np.linalg.norm(m1 - f1) + np.linalg.norm(m2 - f2)
    crossed = np.linalg.norm(m1 - f2) + np.linalg.norm(m2 - f1)
    if not straight < crossed:
        raise ValidationError(
            "means/prototypes violate the crossing hypothesis "
            "(||m1-f1|| + ||m2-f2|| must be < ||m1-f2|| + ||m2-f1||)"
        )
    separation = float(np.linalg.norm(f2 - f1))
    shift = float(w_star) + float(g)
    if abs(shift) >= separation:
        raise ValidationError(
            f"|w_star + g| = {abs(shift):g} >= prototype separation {separation:g}: "
            "no separating surface between the prototypes"
        )
    axis = (f2 - f1) / separation
    dists = []
    for mean in (m1, m2):
        rel = mean - f1
        alpha = float(rel @ axis)
        rho = float(np.linalg.norm(rel - alpha * axis))
        dists.append(_distance_to_surface(alpha, rho, separation, shift))
    closest = min(dists)
    return min(1.0, 2.0 * math.exp(-closest**2 / (2.0 * sigma**2)))
