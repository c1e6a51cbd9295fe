"""
Log-Weight Batches
K proposal samples per example and their (ln p(x|z), ln p(z), ln q(z|x)) triples
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np

from ..engine.diffcore import NodeRef, Tape
from ..engine.stochastics import (
    CategoricalSet,
    DiagGaussian,
    Distribution,
    RngStream,
    kl_gaussian_to_standard,
    log_density_gaussian,
    log_density_standard_normal,
    log_mass_categorical,
    log_mass_uniform,
    sample_categorical,
    sample_gaussian_reparam,
)
from ..errors import ConfigError
from ..modeling.models import ModelParams, decode_log_likelihood, encode


@dataclass(eq=False)
class LogWeightBatch:
    """
    Per-example K-tuples of log-densities, every field shaped (B, K)

    log_prop_path is ln q(z|x) with the proposal's parameters gradient-blocked
    while the path through z is kept; it exists only for reparameterized
    latents. kl_analytic (B,) is the closed-form KL(q‖p(z)) when available.
    """
    log_lik: NodeRef
    log_prior: NodeRef
    log_prop: NodeRef
    latent: Union[NodeRef, np.ndarray]
    log_prop_path: Optional[NodeRef] = None
    kl_analytic: Optional[NodeRef] = None
    noise: Optional[np.ndarray] = None

    @property
    def K(self) -> int:
        return self.log_lik.shape[-1]

    @property
    def n_examples(self) -> int:
        return self.log_lik.shape[0]

    @cached_property
    def log_weights(self) -> NodeRef:
        """ℓ = ln p(x|z) + ln p(z) − ln q(z|x)"""
        return self.log_lik + (self.log_prior - self.log_prop)

    def log_weights_alpha(self, alpha: float) -> NodeRef:
        """ℓ^(α) = α ln p(x|z) + ln p(z) − ln q(z|x)"""
        if alpha == 1.0:
            return self.log_weights
        return self.log_lik * alpha + (self.log_prior - self.log_prop)

    def path_only(self) -> "LogWeightBatch":
        """Same samples with ln q replaced by its path-only version"""
        if self.log_prop_path is None:
            raise ConfigError("path-only log-weights need reparameterized latents", key="base")
        return LogWeightBatch(
            log_lik=self.log_lik,
            log_prior=self.log_prior,
            log_prop=self.log_prop_path,
            latent=self.latent,
            log_prop_path=self.log_prop_path,
            kl_analytic=self.kl_analytic,
            noise=self.noise,
        )


def draw_log_weights(
    params: ModelParams,
    x: Union[int, np.ndarray],
    K: int,
    rng: RngStream,
    tape: Tape,
    proposal: Optional[Distribution] = None,
    noise: Optional[np.ndarray] = None,
) -> LogWeightBatch:
    """
    Draw K latents per example from q(z|x) and score them

    Args:
        x: One symbol or a vector of B symbols; a single symbol is treated as B=1
        proposal: Output of encode(params, x, tape) when the caller already has it
        noise: Fixed standard-normal noise (B, K, d) for continuous latents

    Returns:
        LogWeightBatch with (B, K) fields
    """
    if K < 1:
        raise ConfigError(f"need at least one sample, got {K}", key="K")
    x = np.atleast_1d(np.asarray(x))
    if proposal is None:
        proposal = encode(params, x, tape)
    spec = params.spec

    if isinstance(proposal, DiagGaussian):
        z, noise = sample_gaussian_reparam(proposal, rng, n_samples=K, noise=noise)
        return LogWeightBatch(
            log_lik=decode_log_likelihood(params, z, x, tape),
            log_prior=log_density_standard_normal(z),
            log_prop=log_density_gaussian(proposal, z),
            latent=z,
            log_prop_path=log_density_gaussian(proposal.detached(), z),
            kl_analytic=kl_gaussian_to_standard(proposal),
            noise=noise,
        )

    assert isinstance(proposal, CategoricalSet)
    z = sample_categorical(proposal, rng, n_samples=K)
    prior = np.full(z.shape[:-1], log_mass_uniform(spec.n_latents, spec.n_categories))
    return LogWeightBatch(
        log_lik=decode_log_likelihood(params, z, x, tape),
        log_prior=tape.constant(prior),
        log_prop=log_mass_categorical(proposal, z),
        latent=z,
    )
