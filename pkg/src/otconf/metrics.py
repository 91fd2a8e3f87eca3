"""Selective-prediction evaluation: risk-coverage curves, AURC, filtered accuracy.

Samples are retained in decreasing confidence order (ties broken by ascending
original index, so results are deterministic); the curve records the mean loss
of every prefix and AURC is the plain average of those risks over all n
coverage levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_float_array, readonly
from .exceptions import ValidationError


@dataclass(frozen=True)
class RiskCoverageCurve:
    """Ordered (coverage, risk) pairs and their average.

    Attributes:
        coverage: strictly increasing values in (0, 1].
        risk: mean loss over each retained prefix.
        aurc: mean of ``risk`` over all coverage levels.
    """

    coverage: np.ndarray
    risk: np.ndarray
    aurc: float

    def __post_init__(self):
        coverage = as_float_array(self.coverage, "coverage", ndim=1)
        risk = as_float_array(self.risk, "risk", ndim=1)
        if coverage.shape != risk.shape or coverage.size == 0:
            raise ValidationError("coverage and risk must be equal-length and non-empty")
        if np.any(np.diff(coverage) <= 0):
            raise ValidationError("coverage must be strictly increasing")
        if coverage[0] <= 0 or coverage[-1] > 1:
            raise ValidationError("coverage must lie in (0, 1]")
        if risk.min() < 0:
            raise ValidationError("risk must be non-negative")
        object.__setattr__(self, "coverage", readonly(coverage))
        object.__setattr__(self, "risk", readonly(risk))
        object.__setattr__(self, "aurc", float(self.aurc))


def _confidence_order(confidences: np.ndarray) -> np.ndarray:
    # Primary key: confidence descending; secondary: original index ascending.
    return np.lexsort((np.arange(confidences.shape[0]), -confidences))


def risk_coverage_aurc(losses, confidences) -> RiskCoverageCurve:
    """Risk-coverage curve and AURC for per-sample losses and confidences."""
    losses = as_float_array(losses, "losses", ndim=1)
    confidences = as_float_array(confidences, "confidences", ndim=1)
    if losses.shape != confidences.shape:
        raise ValidationError(
            f"length mismatch: {losses.shape[0]} losses vs {confidences.shape[0]} confidences"
        )
    if losses.size == 0:
        raise ValidationError("need at least one sample")
    if losses.min() < 0:
        raise ValidationError("losses must be non-negative")
    order = _confidence_order(confidences)
    counts = np.arange(1, losses.shape[0] + 1, dtype=np.float64)
    risks = np.cumsum(losses[order]) / counts
    return RiskCoverageCurve(
        coverage=counts / losses.shape[0],
        risk=risks,
        aurc=float(risks.mean()),
    )


def selective_accuracy(correct, confidences, coverage: float) -> float:
    """Accuracy over the ceil(coverage * n) most-confident samples."""
    correct = np.asarray(correct, dtype=bool)
    confidences = as_float_array(confidences, "confidences", ndim=1)
    if correct.ndim != 1 or correct.shape != confidences.shape:
        raise ValidationError("correct and confidences must be equal-length vectors")
    if not 0 < coverage <= 1:
        raise ValidationError(f"coverage must be in (0, 1], got {coverage!r}")
    keep = math.ceil(coverage * correct.shape[0])
    order = _confidence_order(confidences)
    return float(correct[order[:keep]].mean())
