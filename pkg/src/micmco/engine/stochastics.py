"""
Latent Distributions and Seeded Streams
Diagonal Gaussian and categorical latent families, their log-densities and
samplers, and counter-based random streams keyed by (seed, stream_id)
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

from .diffcore import NodeRef, Tape, pick, stop_gradient

HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)
_MASK64 = (1 << 64) - 1


class StreamPurpose(Enum):
    """What a stream is used for; folded into the stream id"""
    MINIBATCH = 1
    LATENT = 2
    EVAL = 3
    INIT = 4
    ORACLE = 5


# ============== Random Streams ==============

class RngStream:
    """
    Counter-based (Philox) random stream
    Same (seed, stream_id) gives the same sequence on every platform;
    distinct stream ids are independent keys of the same generator family.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._bit_generator = np.random.Philox(key=key)
        self.generator = np.random.Generator(self._bit_generator)

    @classmethod
    def for_purpose(cls, seed: int, purpose: StreamPurpose, index: int = 0) -> "RngStream":
        return cls(seed, (purpose.value << 32) | (int(index) & 0xFFFFFFFF))

    @property
    def counter(self) -> int:
        """Low word of the Philox block counter"""
        return int(self._bit_generator.state["state"]["counter"][0])

    def normal(self, shape: Tuple[int, ...]) -> np.ndarray:
        return self.generator.standard_normal(shape)

    def uniform(self, shape: Tuple[int, ...]) -> np.ndarray:
        return self.generator.random(shape)

    def integers(self, high: int, shape: Tuple[int, ...]) -> np.ndarray:
        return self.generator.integers(0, high, size=shape)

    def dirichlet(self, alpha: np.ndarray, size: Optional[int] = None) -> np.ndarray:
        return self.generator.dirichlet(alpha, size=size)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id:#x})"


# ============== Distributions ==============

@dataclass(frozen=True)
class DiagGaussian:
    """N(mean, diag(exp(log_variance))) over the last axis"""
    mean: NodeRef
    log_variance: NodeRef

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]

    def detached(self) -> "DiagGaussian":
        return DiagGaussian(stop_gradient(self.mean), stop_gradient(self.log_variance))

    def with_sample_axis(self) -> "DiagGaussian":
        """Insert a length-1 axis before the latent axis so K samples broadcast"""
        shape = self.mean.shape[:-1] + (1, self.dim)
        return DiagGaussian(self.mean.reshape(shape), self.log_variance.reshape(shape))

    @classmethod
    def standard(cls, tape: Tape, shape: Tuple[int, ...]) -> "DiagGaussian":
        zeros = tape.constant(np.zeros(shape))
        return cls(zeros, zeros)


@dataclass(frozen=True)
class CategoricalSet:
    """Independent categoricals, logits shaped (..., n_latents, n_categories)"""
    logits: NodeRef

    @property
    def n_latents(self) -> int:
        return self.logits.shape[-2]

    @property
    def n_categories(self) -> int:
        return self.logits.shape[-1]

    def log_probs(self) -> NodeRef:
        return self.logits.log_softmax(axis=-1)

    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_probs().value)

    @classmethod
    def uniform(cls, tape: Tape, n_latents: int, n_categories: int) -> "CategoricalSet":
        return cls(tape.constant(np.zeros((n_latents, n_categories))))


Distribution = Union[DiagGaussian, CategoricalSet]


# ============== Gaussian Operations ==============

def sample_gaussian_reparam(
    dist: DiagGaussian,
    rng: RngStream,
    n_samples: Optional[int] = None,
    noise: Optional[np.ndarray] = None,
) -> Tuple[NodeRef, np.ndarray]:
    """
    z = mean + exp(log_variance / 2) * noise, differentiable in mean and log_variance

    With n_samples=K, a sample axis is inserted before the latent axis so
    z has shape (..., K, d). Passing `noise` skips the stream entirely.
    """
    if n_samples is not None:
        dist = dist.with_sample_axis()
        shape = dist.mean.shape[:-2] + (n_samples, dist.dim)
    else:
        shape = dist.mean.shape
    if noise is None:
        noise = rng.normal(shape)
    noise = np.asarray(noise, dtype=np.float64)
    std = (dist.log_variance * 0.5).exp()
    z = dist.mean + std * noise
    return z, noise


def log_density_gaussian(dist: DiagGaussian, z: Union[NodeRef, np.ndarray]) -> NodeRef:
    """Σ_j [−½ ln 2π − ½ log_var_j − (z_j − μ_j)² / (2 exp(log_var_j))] over the last axis"""
    if not isinstance(z, NodeRef):
        z = dist.mean.tape.constant(z)
    if len(z.shape) == len(dist.mean.shape) + 1:
        dist = dist.with_sample_axis()
    precision = (-dist.log_variance).exp()
    quad = (z - dist.mean).square() * precision
    per_dim = (dist.log_variance + quad) * -0.5 - HALF_LOG_TWO_PI
    return per_dim.sum(axis=-1)


def log_density_standard_normal(z: NodeRef) -> NodeRef:
    """ln N(z; 0, I) over the last axis"""
    return (z.square() * -0.5 - HALF_LOG_TWO_PI).sum(axis=-1)


def kl_gaussian_to_standard(dist: DiagGaussian) -> NodeRef:
    """Σ_j ½(μ_j² + exp(log_var_j) − 1 − log_var_j)"""
    lv = dist.log_variance
    return (dist.mean.square() + lv.exp() - lv - 1.0).sum(axis=-1) * 0.5


# ============== Categorical Operations ==============

def sample_categorical(
    dist: CategoricalSet,
    rng: RngStream,
    n_samples: Optional[int] = None,
) -> np.ndarray:
    """
    Inverse-CDF draw per latent; ties go to the lower index

    Returns integers shaped like the logits without the category axis, with a
    sample axis of length K inserted before the latent axis when n_samples=K.
    """
    probs = dist.probabilities()
    cdf = np.cumsum(probs, axis=-1)
    cdf[..., -1] = 1.0
    if n_samples is not None:
        cdf = cdf[..., None, :, :]
        shape = probs.shape[:-2] + (n_samples, probs.shape[-2])
    else:
        shape = probs.shape[:-1]
    u = rng.uniform(shape)
    return np.argmax(u[..., None] < cdf, axis=-1).astype(np.int64)


def log_mass_categorical(dist: CategoricalSet, z: np.ndarray) -> NodeRef:
    """Σ over latents of log_softmax(logits)[z]; z may carry a sample axis"""
    z = np.asarray(z)
    log_probs = dist.log_probs()
    if z.ndim == len(log_probs.shape):
        shape = log_probs.shape[:-2] + (1,) + log_probs.shape[-2:]
        log_probs = log_probs.reshape(shape)
    return pick(log_probs, z).sum(axis=-1)


def log_mass_uniform(n_latents: int, n_categories: int) -> float:
    return -n_latents * math.log(n_categories)


def kl_categorical_to_uniform(dist: CategoricalSet) -> NodeRef:
    """Σ_l KL(q_l ‖ uniform), summed over latents"""
    log_probs = dist.log_probs()
    neg_entropy = (log_probs.exp() * log_probs).sum(axis=-1).sum(axis=-1)
    return neg_entropy + dist.n_latents * math.log(dist.n_categories)
