"""
Objectives Module
Log-weight batches, Monte-Carlo estimators, MI-augmented objectives,
gradient surrogates and model evaluation
"""

from .config import (
    ALPHA_SINGULARITY,
    CONTINUOUS_BASES,
    DEFAULT_RENYI_ALPHA,
    LAMBDA_RANGE,
    SCORE_FUNCTION_BASES,
    BaseEstimator,
    ObjectiveConfig,
    ObjectiveKind,
)

from .log_weights import (
    LogWeightBatch,
    draw_log_weights,
)

from .estimators import (
    kl_estimate,
    log_mean_exp,
    renyi_estimate,
    s_hat_alpha,
    s_hat_elbo,
    s_hat_elbo_analytic,
    s_hat_iwae,
    u_hat,
)

from .composite import (
    EstimatorOutput,
    Term,
    TermKind,
    combine,
    evaluate_objective,
    objective_kl,
    objective_plain,
    objective_power,
    objective_renyi,
    term_value,
)

from .surrogates import (
    Surrogate,
    build_surrogate,
    surrogate_gradients,
    vimco_baselines,
)

from .evaluation import (
    DEFAULT_EVAL_K,
    EvalResult,
    evaluate_model,
    mi_estimate,
    nll_estimate,
    representational_kl,
)

__all__ = [
    # Configuration
    "ALPHA_SINGULARITY",
    "CONTINUOUS_BASES",
    "DEFAULT_RENYI_ALPHA",
    "LAMBDA_RANGE",
    "SCORE_FUNCTION_BASES",
    "BaseEstimator",
    "ObjectiveConfig",
    "ObjectiveKind",
    # Log-weights
    "LogWeightBatch",
    "draw_log_weights",
    # Estimators
    "kl_estimate",
    "log_mean_exp",
    "renyi_estimate",
    "s_hat_alpha",
    "s_hat_elbo",
    "s_hat_elbo_analytic",
    "s_hat_iwae",
    "u_hat",
    # Objectives
    "EstimatorOutput",
    "Term",
    "TermKind",
    "combine",
    "evaluate_objective",
    "objective_kl",
    "objective_plain",
    "objective_power",
    "objective_renyi",
    "term_value",
    # Surrogates
    "Surrogate",
    "build_surrogate",
    "surrogate_gradients",
    "vimco_baselines",
    # Evaluation
    "DEFAULT_EVAL_K",
    "EvalResult",
    "evaluate_model",
    "mi_estimate",
    "nll_estimate",
    "representational_kl",
]
