"""Reference confidence scores: max probability, normalized entropy, cosine.

All accept a single vector or a batch (2-d input scores row-wise). Probability
inputs are validated as simplex vectors with 1e-9 tolerance and renormalized;
natural logarithms throughout with the 0 * ln 0 = 0 convention.
"""

from __future__ import annotations

import numpy as np

from ._validation import as_float_array, check_probability_vector
from .exceptions import ValidationError


def _as_prob_matrix(probs) -> tuple[np.ndarray, bool]:
    arr = as_float_array(probs, "probs")
    if arr.ndim == 1:
        return check_probability_vector(arr)[None, :], True
    if arr.ndim == 2:
        rows = [check_probability_vector(row, f"probs[{i}]") for i, row in enumerate(arr)]
        return np.stack(rows), False
    raise ValidationError(f"probs must be 1- or 2-dimensional, got shape {arr.shape}")


def maxprob(probs):
    """Largest predicted class probability."""
    mat, single = _as_prob_matrix(probs)
    out = mat.max(axis=1)
    return float(out[0]) if single else out


def entropy_score(probs):
    """1 + sum(p ln p) / ln K: 0 at uniform, 1 at one-hot."""
    mat, single = _as_prob_matrix(probs)
    k = mat.shape[1]
    if k < 2:
        raise ValidationError("entropy score needs K >= 2 classes")
    plogp = np.where(mat > 0, mat * np.log(np.where(mat > 0, mat, 1.0)), 0.0)
    out = 1.0 + plogp.sum(axis=1) / np.log(k)
    return float(out[0]) if single else out


def cossim(x, centroid):
    """Cosine similarity to the predicted-class centroid, mapped to [0, 1]."""
    x = as_float_array(x, "x")
    centroid = as_float_array(centroid, "centroid")
    single = x.ndim == 1
    X = x[None, :] if single else x
    C = centroid[None, :] if centroid.ndim == 1 else centroid
    if C.shape[0] == 1 and X.shape[0] > 1:
        C = np.broadcast_to(C, X.shape)
    if C.shape != X.shape:
        raise ValidationError(f"centroid shape {C.shape} does not match x shape {X.shape}")
    x_norm = np.linalg.norm(X, axis=1)
    c_norm = np.linalg.norm(C, axis=1)
    zero = np.flatnonzero((x_norm == 0) | (c_norm == 0))
    if zero.size:
        raise ValidationError(f"zero vector at row {zero[0]}: cosine undefined")
    out = 0.5 * (1.0 + (X * C).sum(axis=1) / (x_norm * c_norm))
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if single else out
