"""Optimal-transport confidence scores for pseudo-labeled data.

Solves the entropic semi-discrete optimal transport dual between target
features and weighted source prototypes, turns the solved dual weights into
per-sample confidence scores, and evaluates those scores with
selective-prediction metrics, label-preservation post-checks, and seeded
synthetic experiments. Ships both a functional API and sklearn-style
estimators, plus the ``otconf`` command line tool.
"""

import os as _os

# Honor OTCONF_THREADS before numpy (and its BLAS) is first imported.
_cap = _os.environ.get("OTCONF_THREADS")
if _cap:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _cap)
del _os, _cap

from .exceptions import NumericError, OTConfError, ValidationError
from .data import (
    ClassProportions,
    DiscreteMeasure,
    FeatureTable,
    class_means,
    class_proportions,
)
from .exact import TransportPlan, empirical_wasserstein, solve_discrete_ot
from .solver import (
    DualState,
    SolverConfig,
    TraceRecord,
    assignment_sharpness,
    dual_objective,
    hard_assign,
    marginal_residual,
    sgd_step,
    smoothed_assignment,
    solve,
    transport_cost,
)
from .scoring import (
    PostCheckResult,
    ScoreReport,
    mean_score,
    misclassification_bound,
    normalize_and_reweight,
    ot_score,
    ot_scores,
    postcheck_binary,
    postcheck_componentwise,
    score_gap,
    score_report,
    shifted_distance,
)
from .baselines import cossim, entropy_score, maxprob
from .metrics import RiskCoverageCurve, risk_coverage_aurc, selective_accuracy
from .datasets import (
    ClusterSpec,
    epsilon_ablation,
    gen_clusters,
    overlap_experiment,
    reweight_sweep,
    separation_check,
)
from .estimators import OTConfidenceScorer, SemiDiscreteTransport

__version__ = "0.1.0"

__all__ = [
    "ClassProportions",
    "ClusterSpec",
    "DiscreteMeasure",
    "DualState",
    "FeatureTable",
    "NumericError",
    "OTConfError",
    "OTConfidenceScorer",
    "PostCheckResult",
    "RiskCoverageCurve",
    "ScoreReport",
    "SemiDiscreteTransport",
    "SolverConfig",
    "TraceRecord",
    "TransportPlan",
    "ValidationError",
    "assignment_sharpness",
    "class_means",
    "class_proportions",
    "cossim",
    "dual_objective",
    "empirical_wasserstein",
    "entropy_score",
    "epsilon_ablation",
    "gen_clusters",
    "hard_assign",
    "marginal_residual",
    "maxprob",
    "mean_score",
    "misclassification_bound",
    "normalize_and_reweight",
    "ot_score",
    "ot_scores",
    "overlap_experiment",
    "postcheck_binary",
    "postcheck_componentwise",
    "reweight_sweep",
    "risk_coverage_aurc",
    "score_gap",
    "score_report",
    "selective_accuracy",
    "separation_check",
    "sgd_step",
    "shifted_distance",
    "smoothed_assignment",
    "solve",
    "solve_discrete_ot",
    "transport_cost",
]
