"""
Oracle Module
Tiny enumerable models, exact ground truth by enumeration, and the property audit
"""

from .tiny_model import (
    MAX_STATES,
    TinyLogits,
    TinyModel,
    TinyTables,
    collapsed_tiny_model,
    deterministic_decoder_model,
    random_tiny_model,
)

from .enumeration import (
    ENUMERATION_LIMIT,
    ESTIMATOR_REGISTRY,
    EnumeratedBatches,
    EstimatorKind,
    GradientCheck,
    enumerate_batches,
    enumerate_multisets,
    enumerate_tuples,
    exact_beta_vae,
    exact_elbo,
    exact_estimator_expectation,
    exact_estimator_gradient,
    exact_estimator_variance,
    exact_marginal,
    exact_mutual_information,
    exact_p_alpha,
    exact_posterior,
    exact_posterior_kl,
    exact_posterior_log_lik,
    exact_renyi,
    exact_representational_kl,
    exchangeable_expectation,
    monte_carlo_expectation,
    renyi_by_definition,
)

from .audit import (
    CHECK_REGISTRY,
    AuditCheck,
    CheckResult,
    format_audit_table,
    run_audit,
)

__all__ = [
    # Tiny models
    "MAX_STATES",
    "TinyLogits",
    "TinyModel",
    "TinyTables",
    "collapsed_tiny_model",
    "deterministic_decoder_model",
    "random_tiny_model",
    # Enumeration
    "ENUMERATION_LIMIT",
    "ESTIMATOR_REGISTRY",
    "EnumeratedBatches",
    "EstimatorKind",
    "GradientCheck",
    "enumerate_batches",
    "enumerate_multisets",
    "enumerate_tuples",
    "exact_beta_vae",
    "exact_elbo",
    "exact_estimator_expectation",
    "exact_estimator_gradient",
    "exact_estimator_variance",
    "exact_marginal",
    "exact_mutual_information",
    "exact_p_alpha",
    "exact_posterior",
    "exact_posterior_kl",
    "exact_posterior_log_lik",
    "exact_renyi",
    "exact_representational_kl",
    "exchangeable_expectation",
    "monte_carlo_expectation",
    "renyi_by_definition",
    # Audit
    "CHECK_REGISTRY",
    "AuditCheck",
    "CheckResult",
    "format_audit_table",
    "run_audit",
]
