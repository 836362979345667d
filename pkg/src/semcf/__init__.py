"""Counterfactual means and variances in Gaussian linear structural equation models."""

from .conditioning import (
    BoxMoments,
    ConditionedMoments,
    Evidence,
    box_moments,
    condition_box,
    condition_point,
    partial_cov,
    regression_coeffs,
)
from .engine import (
    CounterfactualResult,
    CovariateSetScore,
    EngineConfig,
    ObservationalModel,
    Plan,
    counterfactual_plan,
    counterfactual_point,
    intervene,
    optimal_plan,
    rank_covariate_sets,
)
from .errors import *  # noqa: F401,F403
from .graph import (
    PathDiagram,
    VertexPartition,
    ancestors,
    backdoor_admissible,
    build_diagram,
    conditional_iv,
    d_separated,
    descendants,
    partition,
    single_door,
)
from .identification import IdentificationResult, backdoor_estimate, identify, iv_estimate
from .io import load_model, model_to_dict, parse_evidence, parse_model
from .oracle import MCResult, SimConfig, mc_counterfactual, simulate_joint
from .sem import (
    GaussianMoments,
    LinearSEM,
    conditional_disturbance_moments,
    disturbance_moments,
    implied_moments,
    total_effect,
    total_effect_by_paths,
)

__version__ = "0.1.0"
