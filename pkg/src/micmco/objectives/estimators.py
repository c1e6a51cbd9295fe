"""
Monte-Carlo Estimators
Ŝ (IWAE and ELBO forms), Ŝ_α, the self-normalized Û, and the KL and Rényi
estimates built from them; every function maps (B, K) batches to (B,) nodes
"""

import math

from ..engine.diffcore import NodeRef, logsumexp, softmax_weights
from ..errors import ConfigError
from .log_weights import LogWeightBatch


def log_mean_exp(log_weights: NodeRef) -> NodeRef:
    K = log_weights.shape[-1]
    return logsumexp(log_weights, axis=-1) - math.log(K)


def s_hat_iwae(batch: LogWeightBatch) -> NodeRef:
    """ln (1/K) Σ exp(ℓ_i)"""
    return log_mean_exp(batch.log_weights)


def s_hat_alpha(batch: LogWeightBatch, alpha: float) -> NodeRef:
    """ln (1/K) Σ exp(α ln p(x|z_i) + ln p(z_i) − ln q(z_i|x))"""
    return log_mean_exp(batch.log_weights_alpha(alpha))


def s_hat_elbo(batch: LogWeightBatch, alpha: float = 1.0) -> NodeRef:
    """(1/K) Σ ℓ_i^(α), the sampled ELBO"""
    return batch.log_weights_alpha(alpha).mean(axis=-1)


def s_hat_elbo_analytic(batch: LogWeightBatch, alpha: float = 1.0) -> NodeRef:
    """(1/K) Σ α ln p(x|z_i) − KL(q‖p(z)) with the KL in closed form"""
    if batch.kl_analytic is None:
        raise ConfigError("elbo_analytic needs a closed-form KL (continuous latents)", key="base")
    expected_lik = batch.log_lik.mean(axis=-1)
    if alpha != 1.0:
        expected_lik = expected_lik * alpha
    return expected_lik - batch.kl_analytic


def u_hat(batch: LogWeightBatch) -> NodeRef:
    """Σ w̃_i ln p(x|z_i) with w̃ = softmax(ℓ)"""
    weights = softmax_weights(batch.log_weights, axis=-1)
    return (weights * batch.log_lik).sum(axis=-1)


def kl_estimate(batch: LogWeightBatch, base_value: NodeRef) -> NodeRef:
    """Û − Ŝ, the estimate of KL(p(z|x)‖p(z))"""
    return u_hat(batch) - base_value


def renyi_estimate(s_alpha: NodeRef, s_base: NodeRef, alpha: float) -> NodeRef:
    """(Ŝ_α − α Ŝ) / (α − 1), the estimate of D_α(p(z|x)‖p(z))"""
    return (s_alpha - s_base * alpha) * (1.0 / (alpha - 1.0))
