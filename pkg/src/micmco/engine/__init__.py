"""
Engine Module
Reverse-mode differentiation core and latent-variable stochastics
"""

from .diffcore import (
    OP_REGISTRY,
    NodeRef,
    OpSpec,
    Tape,
    Tensor,
    as_tensor,
    backward,
    broadcast,
    concat,
    embedding_lookup,
    forward_op,
    log_softmax_pick,
    logsumexp,
    pick,
    softmax_log,
    softmax_weights,
    stop_gradient,
)

from .stochastics import (
    CategoricalSet,
    DiagGaussian,
    Distribution,
    RngStream,
    StreamPurpose,
    kl_categorical_to_uniform,
    kl_gaussian_to_standard,
    log_density_gaussian,
    log_density_standard_normal,
    log_mass_categorical,
    log_mass_uniform,
    sample_categorical,
    sample_gaussian_reparam,
)

__all__ = [
    # Differentiation
    "OP_REGISTRY",
    "NodeRef",
    "OpSpec",
    "Tape",
    "Tensor",
    "as_tensor",
    "backward",
    "broadcast",
    "concat",
    "embedding_lookup",
    "forward_op",
    "log_softmax_pick",
    "logsumexp",
    "pick",
    "softmax_log",
    "softmax_weights",
    "stop_gradient",
    # Stochastics
    "CategoricalSet",
    "DiagGaussian",
    "Distribution",
    "RngStream",
    "StreamPurpose",
    "kl_categorical_to_uniform",
    "kl_gaussian_to_standard",
    "log_density_gaussian",
    "log_density_standard_normal",
    "log_mass_categorical",
    "log_mass_uniform",
    "sample_categorical",
    "sample_gaussian_reparam",
]
