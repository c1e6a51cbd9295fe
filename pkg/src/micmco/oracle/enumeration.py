"""
Exact Enumeration Oracle
Ground-truth marginals, divergences and exact estimator expectations,
variances and gradients computed by summing over every latent tuple
"""

import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp, rel_entr, xlogy

from ..engine.diffcore import NodeRef, Tape, backward, pick
from ..engine.stochastics import RngStream
from ..errors import ConfigError, EnumerationTooLargeError
from ..objectives.composite import evaluate_objective
from ..objectives.config import ALPHA_SINGULARITY, DEFAULT_RENYI_ALPHA, ObjectiveConfig
from ..objectives.estimators import (
    kl_estimate,
    renyi_estimate,
    s_hat_alpha,
    s_hat_elbo,
    s_hat_iwae,
    u_hat,
)
from ..objectives.log_weights import LogWeightBatch
from ..objectives.surrogates import build_surrogate
from .tiny_model import TinyModel, TinyTables

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 10 ** 6
FINITE_DIFFERENCE_STEP = 1e-6


# ============== Table Quantities ==============

def exact_marginal(m: TinyModel, x: int) -> float:
    """ln p(x) = ln Σ_z p(z) p(x|z)"""
    with np.errstate(divide="ignore"):
        return float(logsumexp(np.log(m.prior) + np.log(m.likelihood[:, x])))


def exact_posterior(m: TinyModel, x: int) -> np.ndarray:
    joint = m.prior * m.likelihood[:, x]
    return joint / joint.sum()


def exact_posterior_kl(m: TinyModel, x: int) -> float:
    """KL(p(z|x) ‖ p(z))"""
    return float(np.sum(rel_entr(exact_posterior(m, x), m.prior)))


def exact_posterior_log_lik(m: TinyModel, x: int) -> float:
    """E_p(z|x)[ln p(x|z)], the limit of Û as K grows"""
    return float(np.sum(xlogy(exact_posterior(m, x), m.likelihood[:, x])))


def exact_p_alpha(m: TinyModel, x: int, alpha: float) -> float:
    """ln p^α(x) = ln Σ_z p(z) p(x|z)^α"""
    if alpha <= 0.0:
        raise ConfigError(f"alpha must be positive, got {alpha}", key="alpha")
    with np.errstate(divide="ignore"):
        return float(logsumexp(np.log(m.prior) + alpha * np.log(m.likelihood[:, x])))


def exact_renyi(m: TinyModel, x: int, alpha: float) -> float:
    """D_α(p(z|x) ‖ p(z)) = (ln p^α(x) − α ln p(x)) / (α − 1)"""
    if abs(alpha - 1.0) < ALPHA_SINGULARITY:
        raise ConfigError(f"alpha={alpha} is the KL limit; use exact_posterior_kl", key="alpha")
    return (exact_p_alpha(m, x, alpha) - alpha * exact_marginal(m, x)) / (alpha - 1.0)


def renyi_by_definition(m: TinyModel, x: int, alpha: float) -> float:
    """(α − 1)⁻¹ ln Σ_z p(z|x)^α p(z)^(1−α), computed independently of ln p^α"""
    post = exact_posterior(m, x)
    support = post > 0
    terms = alpha * np.log(post[support]) + (1.0 - alpha) * np.log(m.prior[support])
    return float(logsumexp(terms)) / (alpha - 1.0)


def exact_representational_kl(m: TinyModel, x: int) -> float:
    """KL(q(z|x) ‖ p(z))"""
    return float(np.sum(rel_entr(m.proposal[x], m.prior)))


def exact_elbo(m: TinyModel, x: int) -> float:
    """E_q[ln p(x|z) + ln p(z) − ln q(z|x)]"""
    q = m.proposal[x]
    return float(np.sum(xlogy(q, m.likelihood[:, x])) - np.sum(rel_entr(q, m.prior)))


def exact_beta_vae(m: TinyModel, x: int, beta: float) -> float:
    """E_q[ln p(x|z)] − β KL(q(z|x) ‖ p(z))"""
    q = m.proposal[x]
    return float(np.sum(xlogy(q, m.likelihood[:, x])) - beta * np.sum(rel_entr(q, m.prior)))


def exact_mutual_information(m: TinyModel, data_probs: Optional[np.ndarray] = None) -> float:
    """Σ_x p_D(x) KL(p(z|x) ‖ p(z)); p_D defaults to uniform"""
    if data_probs is None:
        data_probs = np.full(m.n_x, 1.0 / m.n_x)
    return float(sum(p * exact_posterior_kl(m, x) for x, p in enumerate(data_probs) if p > 0))


# ============== Enumerated Batches ==============

class EstimatorKind(str, Enum):
    """Per-draw quantities whose exact moments the oracle computes"""
    S_HAT = "s_hat"
    ELBO = "elbo"
    S_ALPHA = "s_alpha"
    U_HAT = "u_hat"
    KL_EST = "kl_est"
    RENYI_EST = "renyi_est"
    OBJECTIVE = "objective"


def enumerate_tuples(n_z: int, K: int) -> np.ndarray:
    """All |Z|^K latent tuples, lexicographic, shaped (|Z|^K, K)"""
    if n_z ** K > ENUMERATION_LIMIT:
        raise EnumerationTooLargeError(
            f"|Z|^K = {n_z}^{K} exceeds {ENUMERATION_LIMIT}; "
            "use monte_carlo_expectation instead"
        )
    return np.array(list(itertools.product(range(n_z), repeat=K)), dtype=np.int64).reshape(-1, K)


def _batch_from_tuples(tables: TinyTables, x: int, tuples: np.ndarray) -> LogWeightBatch:
    return LogWeightBatch(
        log_lik=pick(tables.log_lik_column(x), tuples),
        log_prior=pick(tables.log_prior, tuples),
        log_prop=pick(tables.log_prop_row(x), tuples),
        latent=tuples,
    )


@dataclass(eq=False)
class EnumeratedBatches:
    """
    Every (z_lik tuple, z_mi tuple) configuration as one row

    weights are Π q(z_i|x) over all samples in the row, as a node so that the
    exact expectation can itself be differentiated.
    """
    tape: Tape
    tables: TinyTables
    batch_lik: LogWeightBatch
    batch_mi: LogWeightBatch
    weights: NodeRef

    @property
    def n_rows(self) -> int:
        return self.weights.shape[0]


def enumerate_batches(
    m: TinyModel,
    x: int,
    k_lik: int,
    k_mi: Optional[int] = None,
    tape: Optional[Tape] = None,
    requires_grad: bool = False,
) -> EnumeratedBatches:
    """
    Enumerate all sample configurations for one observation

    With k_mi None or equal to k_lik the two batches are the same object, the
    same-sample reuse of the objectives; otherwise the rows range over the
    product of both tuple sets.
    """
    tape = tape if tape is not None else Tape()
    tables = m.bind(tape, requires_grad)
    if k_mi is None or k_mi == k_lik:
        tuples = enumerate_tuples(m.n_z, k_lik)
        batch = _batch_from_tuples(tables, x, tuples)
        weights = batch.log_prop.sum(axis=-1).exp()
        return EnumeratedBatches(tape, tables, batch, batch, weights)

    if m.n_z ** (k_lik + k_mi) > ENUMERATION_LIMIT:
        raise EnumerationTooLargeError(
            f"|Z|^(K_lik+K_mi) = {m.n_z}^{k_lik + k_mi} exceeds {ENUMERATION_LIMIT}"
        )
    t_lik = enumerate_tuples(m.n_z, k_lik)
    t_mi = enumerate_tuples(m.n_z, k_mi)
    rows_lik = np.repeat(t_lik, len(t_mi), axis=0)
    rows_mi = np.tile(t_mi, (len(t_lik), 1))
    batch_lik = _batch_from_tuples(tables, x, rows_lik)
    batch_mi = _batch_from_tuples(tables, x, rows_mi)
    weights = (batch_lik.log_prop.sum(axis=-1) + batch_mi.log_prop.sum(axis=-1)).exp()
    return EnumeratedBatches(tape, tables, batch_lik, batch_mi, weights)


def _s_hat(lik, mi, config, alpha):
    return s_hat_iwae(lik)


def _elbo(lik, mi, config, alpha):
    return s_hat_elbo(lik)


def _s_alpha(lik, mi, config, alpha):
    return s_hat_alpha(lik, alpha)


def _u_hat(lik, mi, config, alpha):
    return u_hat(lik)


def _kl_est(lik, mi, config, alpha):
    return kl_estimate(lik, s_hat_iwae(lik))


def _renyi_est(lik, mi, config, alpha):
    return renyi_estimate(s_hat_alpha(lik, alpha), s_hat_iwae(lik), alpha)


def _objective(lik, mi, config, alpha):
    if config is None:
        raise ConfigError("the objective estimator needs an ObjectiveConfig", key="config")
    return evaluate_objective(config, lik, mi).expression


EstimatorFn = Callable[[LogWeightBatch, LogWeightBatch, Optional[ObjectiveConfig], float], NodeRef]

# Complete mapping of estimator kinds to their per-row value expressions
ESTIMATOR_REGISTRY: Dict[EstimatorKind, EstimatorFn] = {
    EstimatorKind.S_HAT: _s_hat,
    EstimatorKind.ELBO: _elbo,
    EstimatorKind.S_ALPHA: _s_alpha,
    EstimatorKind.U_HAT: _u_hat,
    EstimatorKind.KL_EST: _kl_est,
    EstimatorKind.RENYI_EST: _renyi_est,
    EstimatorKind.OBJECTIVE: _objective,
}


def _sample_counts(kind: EstimatorKind, K: Optional[int], config: Optional[ObjectiveConfig]) -> Tuple[int, Optional[int]]:
    if kind is EstimatorKind.OBJECTIVE:
        if config is None:
            raise ConfigError("the objective estimator needs an ObjectiveConfig", key="config")
        k_mi = config.k_mi if config.uses_mi_batch else None
        return config.k_lik, k_mi
    if K is None or K < 1:
        raise ConfigError(f"need a positive sample count, got {K}", key="K")
    return K, None


def _row_values(
    m: TinyModel,
    x: int,
    kind: EstimatorKind,
    K: Optional[int],
    config: Optional[ObjectiveConfig],
    alpha: float,
) -> Tuple[np.ndarray, np.ndarray]:
    kind = EstimatorKind(kind)
    k_lik, k_mi = _sample_counts(kind, K, config)
    enum = enumerate_batches(m, x, k_lik, k_mi)
    values = ESTIMATOR_REGISTRY[kind](enum.batch_lik, enum.batch_mi, config, alpha)
    return np.asarray(values.value), np.asarray(enum.weights.value)


def exact_estimator_expectation(
    m: TinyModel,
    x: int,
    kind: EstimatorKind,
    K: Optional[int] = None,
    config: Optional[ObjectiveConfig] = None,
    alpha: float = DEFAULT_RENYI_ALPHA,
) -> float:
    """
    Σ over all latent tuples of Π q(z_i|x) × estimator value

    For kind=objective the sample counts come from config (k_lik, and k_mi
    when the objective has an MI term); otherwise K is used.
    """
    values, weights = _row_values(m, x, kind, K, config, alpha)
    return float(np.sum(weights * values))


def exact_estimator_variance(
    m: TinyModel,
    x: int,
    kind: EstimatorKind,
    K: Optional[int] = None,
    config: Optional[ObjectiveConfig] = None,
    alpha: float = DEFAULT_RENYI_ALPHA,
) -> float:
    """Exact variance of the estimator over q(z_1:K|x)"""
    values, weights = _row_values(m, x, kind, K, config, alpha)
    mean = np.sum(weights * values)
    return float(max(np.sum(weights * (values - mean) ** 2), 0.0))


def enumerate_multisets(n_z: int, K: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    One sorted K-tuple per multiset of latents, with ln of its multinomial coefficient

    C(|Z|+K−1, K) rows instead of |Z|^K, so estimators symmetric in their
    samples can be taken exactly at K=64.
    """
    if math.comb(n_z + K - 1, K) > ENUMERATION_LIMIT:
        raise EnumerationTooLargeError(
            f"C(|Z|+K-1, K) for |Z|={n_z}, K={K} exceeds {ENUMERATION_LIMIT}"
        )
    tuples = np.array(
        list(itertools.combinations_with_replacement(range(n_z), K)), dtype=np.int64
    ).reshape(-1, K)
    counts = np.stack([np.sum(tuples == z, axis=1) for z in range(n_z)], axis=1)
    log_coef = gammaln(K + 1) - gammaln(counts + 1).sum(axis=1)
    return tuples, log_coef


def exchangeable_expectation(
    m: TinyModel,
    x: int,
    kind: EstimatorKind,
    K: int,
    alpha: float = DEFAULT_RENYI_ALPHA,
) -> float:
    """Exact expectation over q(z_1:K|x) of a per-draw estimator, summed over multisets"""
    kind = EstimatorKind(kind)
    if kind is EstimatorKind.OBJECTIVE:
        raise ConfigError("exchangeable_expectation takes per-draw estimator kinds only", key="kind")
    if K < 1:
        raise ConfigError(f"need a positive sample count, got {K}", key="K")
    tuples, log_coef = enumerate_multisets(m.n_z, K)
    tape = Tape()
    tables = m.bind(tape, requires_grad=False)
    batch = _batch_from_tuples(tables, x, tuples)
    values = np.asarray(ESTIMATOR_REGISTRY[kind](batch, batch, None, alpha).value)
    weights = np.exp(log_coef + np.asarray(batch.log_prop.value).sum(axis=-1))
    return float(np.sum(weights * values))


def monte_carlo_expectation(
    m: TinyModel,
    x: int,
    kind: EstimatorKind,
    K: int,
    n_tuples: int,
    rng: RngStream,
    alpha: float = DEFAULT_RENYI_ALPHA,
    chunk_rows: int = 1 << 18,
) -> Tuple[float, float]:
    """(mean, standard error) of the estimator over n_tuples draws of z_1:K ~ q(z|x)"""
    kind = EstimatorKind(kind)
    if kind is EstimatorKind.OBJECTIVE:
        raise ConfigError("monte_carlo_expectation takes per-draw estimator kinds only", key="kind")
    per_chunk = max(1, chunk_rows // K)
    values = []
    remaining = n_tuples
    while remaining > 0:
        n = min(per_chunk, remaining)
        tuples = rng.generator.choice(m.n_z, size=(n, K), p=m.proposal[x])
        tape = Tape()
        tables = m.bind(tape, requires_grad=False)
        batch = _batch_from_tuples(tables, x, tuples)
        values.append(np.asarray(ESTIMATOR_REGISTRY[kind](batch, batch, None, alpha).value))
        remaining -= n
    values = np.concatenate(values)
    return float(np.mean(values)), float(np.std(values, ddof=1) / np.sqrt(len(values)))


# ============== Exact Gradients ==============

@dataclass
class GradientCheck:
    """Three independent gradients of E[Ô] over the model's parameter vector"""
    finite_difference: np.ndarray
    analytic: np.ndarray
    surrogate_expectation: np.ndarray

    def max_error(self) -> float:
        """Largest disagreement of the surrogate expectation with the analytic gradient"""
        return float(np.max(np.abs(self.surrogate_expectation - self.analytic)))

    def max_fd_error(self) -> float:
        return float(np.max(np.abs(self.finite_difference - self.analytic)))


def _flatten_grads(tables: TinyTables, grads: Dict[NodeRef, np.ndarray]) -> np.ndarray:
    leaves = tables.leaves
    return np.concatenate([np.ravel(grads[leaves[k]]) for k in ("prior", "likelihood", "proposal")])


def _surrogate_gradient(m: TinyModel, x: int, config: ObjectiveConfig) -> np.ndarray:
    k_mi = config.k_mi if config.uses_mi_batch else None
    enum = enumerate_batches(m, x, config.k_lik, k_mi, requires_grad=True)
    output = evaluate_objective(config, enum.batch_lik, enum.batch_mi)
    surrogate = build_surrogate(config, output, example_weights=np.asarray(enum.weights.value))
    leaves = enum.tables.leaves
    if surrogate.shared:
        grads = backward(enum.tape, surrogate.theta_root, wrt=leaves.values())
    else:
        grads = backward(enum.tape, surrogate.theta_root, wrt=[leaves["prior"], leaves["likelihood"]])
        grads.update(backward(enum.tape, surrogate.phi_root, wrt=[leaves["proposal"]]))
    return _flatten_grads(enum.tables, grads)


def _analytic_gradient(m: TinyModel, x: int, config: ObjectiveConfig) -> np.ndarray:
    k_mi = config.k_mi if config.uses_mi_batch else None
    enum = enumerate_batches(m, x, config.k_lik, k_mi, requires_grad=True)
    output = evaluate_objective(config, enum.batch_lik, enum.batch_mi)
    expectation = (enum.weights * output.expression).sum()
    grads = backward(enum.tape, expectation, wrt=enum.tables.leaves.values())
    return _flatten_grads(enum.tables, grads)


def exact_estimator_gradient(
    m: TinyModel,
    x: int,
    config: ObjectiveConfig,
    h: float = FINITE_DIFFERENCE_STEP,
) -> GradientCheck:
    """
    ∇ of E[Ô] with respect to the model's logits, three ways

    finite_difference: central differences of the exact expectation (step h)
    analytic: backward through Σ Π q · Ô with the weights differentiable
    surrogate_expectation: Σ Π q · ∇surrogate, what the gradient estimator
        delivers on average
    """
    if not m.is_parameterized:
        raise ConfigError("exact gradients need a model built from logits")
    vector = m.param_vector()
    fd = np.zeros_like(vector)
    for i in range(vector.size):
        step = np.zeros_like(vector)
        step[i] = h
        up = exact_estimator_expectation(m.with_param_vector(vector + step), x, EstimatorKind.OBJECTIVE, config=config)
        down = exact_estimator_expectation(m.with_param_vector(vector - step), x, EstimatorKind.OBJECTIVE, config=config)
        fd[i] = (up - down) / (2.0 * h)
    return GradientCheck(
        finite_difference=fd,
        analytic=_analytic_gradient(m, x, config),
        surrogate_expectation=_surrogate_gradient(m, x, config),
    )
