"""Bregman and g-Bregman divergences with clean bias-variance decompositions.

The package provides:

- ``core``: weighted point ensembles, feasible domains, loss interfaces;
- ``divergences``: the g-Bregman engine (duality, reversal) and a catalog of
  closed-form divergences plus counterexample losses;
- ``centroids``: central labels/predictions in closed form, under linear
  equality constraints, and by a brute-force minimization oracle;
- ``decomposition``: expected loss = intrinsic noise + bias + variance
  reports, with the additivity gap as a first-class output;
- ``uniqueness``: numerical separability tests of the mixed second
  derivative and an empirical classifier for black-box losses;
- ``cli``: the ``bvd`` batch front end.
"""

from .core import (
    BoundaryError,
    CallableLoss,
    ConvergenceError,
    ConvexityError,
    Domain,
    InfeasibleMeanError,
    LossFunction,
    WeightedEnsemble,
    expectation,
    make_ensemble,
)
from .divergences import (
    GBregmanDivergence,
    Generator,
    Mapping,
    catalog,
    catalog_from_json,
    dual_pair,
    eval_concise,
    gbregman_eval,
    identity_mapping,
    reverse,
)
from .centroids import (
    CentroidResult,
    brute_force_centroid,
    constrained_central_label,
    constrained_central_prediction,
    f_mean_prediction,
    g_mean_label,
    power_mean_centroids,
)
from .decomposition import (
    DecompositionReport,
    decompose_constrained_bregman,
    decompose_gbregman,
    decompose_generic,
    exp_family_loglik_decompose,
    ordering_violation_gap,
)
from .uniqueness import (
    ClassifierConfig,
    MixedHessianSample,
    SeparabilityVerdict,
    classify_loss,
    mixed_hessian_fd,
    separability_rank_test,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryError",
    "CallableLoss",
    "CentroidResult",
    "ClassifierConfig",
    "ConvergenceError",
    "ConvexityError",
    "DecompositionReport",
    "Domain",
    "GBregmanDivergence",
    "Generator",
    "InfeasibleMeanError",
    "LossFunction",
    "Mapping",
    "MixedHessianSample",
    "SeparabilityVerdict",
    "WeightedEnsemble",
    "brute_force_centroid",
    "catalog",
    "catalog_from_json",
    "classify_loss",
    "constrained_central_label",
    "constrained_central_prediction",
    "decompose_constrained_bregman",
    "decompose_gbregman",
    "decompose_generic",
    "dual_pair",
    "eval_concise",
    "exp_family_loglik_decompose",
    "expectation",
    "f_mean_prediction",
    "g_mean_label",
    "gbregman_eval",
    "identity_mapping",
    "make_ensemble",
    "mixed_hessian_fd",
    "ordering_violation_gap",
    "power_mean_centroids",
    "reverse",
    "separability_rank_test",
]
