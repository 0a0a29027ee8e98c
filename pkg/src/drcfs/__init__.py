"""Doubly robust causal feature selection.

Cross-fitted debiased estimation of per-feature conditional-mean gaps,
paired significance testing, and dependence-robust false-discovery
control, together with a synthetic graph simulator, exact discrete-model
oracles, and selection metrics.
"""

from .dgp import (
    CausalGraph,
    DgpConfig,
    NoiseSpec,
    SimulatedDataset,
    SimulationError,
    TransformSpec,
    TRANSFORM_FAMILIES,
    eval_transform,
    ground_truth_parents,
    sample_graph,
    simulate_dataset,
)
from .metrics import Confusion, accuracy, confusion, csi, f1, score_selection
from .nuisance import (
    FeatureMap,
    FixedModel,
    ForestModel,
    IDENTITY_MAP,
    IllConditionedError,
    LearnerSpec,
    LinearModel,
    MOMENT_OUTCOME_PRODUCT,
    NuisancePair,
    fit_forest,
    fit_mean,
    fit_nuisance_pair,
    fit_riesz,
    model_from_json,
    model_to_json,
    predict,
)
from .oracle import (
    DiscreteSCM,
    GaussianPairFixture,
    ZeroProbabilityError,
    chi_from_moments,
    counterexample_fixtures,
    exact_acde,
    exact_chi,
    exact_chi_all,
    random_scm,
    scm_from_json,
    scm_to_json,
)
from .selection import (
    FeatureTestResult,
    FoldPlan,
    ScoreSamples,
    SelectionReport,
    by_adjust,
    estimate_chi,
    make_folds,
    paired_t_test,
    run_drcfs,
    score_theta,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # dgp
    "CausalGraph",
    "DgpConfig",
    "NoiseSpec",
    "SimulatedDataset",
    "SimulationError",
    "TransformSpec",
    "TRANSFORM_FAMILIES",
    "eval_transform",
    "ground_truth_parents",
    "sample_graph",
    "simulate_dataset",
    # metrics
    "Confusion",
    "accuracy",
    "confusion",
    "csi",
    "f1",
    "score_selection",
    # nuisance
    "FeatureMap",
    "FixedModel",
    "ForestModel",
    "IDENTITY_MAP",
    "IllConditionedError",
    "LearnerSpec",
    "LinearModel",
    "MOMENT_OUTCOME_PRODUCT",
    "NuisancePair",
    "fit_forest",
    "fit_mean",
    "fit_nuisance_pair",
    "fit_riesz",
    "model_from_json",
    "model_to_json",
    "predict",
    # oracle
    "DiscreteSCM",
    "GaussianPairFixture",
    "ZeroProbabilityError",
    "chi_from_moments",
    "counterexample_fixtures",
    "exact_acde",
    "exact_chi",
    "exact_chi_all",
    "random_scm",
    "scm_from_json",
    "scm_to_json",
    # selection
    "FeatureTestResult",
    "FoldPlan",
    "ScoreSamples",
    "SelectionReport",
    "by_adjust",
    "estimate_chi",
    "make_folds",
    "paired_t_test",
    "run_drcfs",
    "score_theta",
]
