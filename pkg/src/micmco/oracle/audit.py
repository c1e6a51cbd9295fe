"""
Property Audit
Executable checks of the estimator identities, bounds and gradient
unbiasedness on random tiny models, reported as a pass/fail table
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..engine.stochastics import RngStream, StreamPurpose
from ..objectives.composite import objective_kl, objective_power, objective_renyi
from ..objectives.config import BaseEstimator, ObjectiveConfig, ObjectiveKind
from ..modeling.models import LatentKind
from .enumeration import (
    EstimatorKind,
    enumerate_batches,
    exact_beta_vae,
    exact_estimator_gradient,
    exact_estimator_variance,
    exact_marginal,
    exact_p_alpha,
    exact_posterior_kl,
    exact_renyi,
    exact_representational_kl,
    exchangeable_expectation,
    renyi_by_definition,
)
from .tiny_model import POSITIVITY_FLOOR, TinyModel, deterministic_decoder_model, random_tiny_model

logger = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-12
GRADIENT_TOLERANCE = 1e-6

# KL-estimate bias check; proposal entries stay above BIAS_FLOOR
BIAS_SAMPLE_COUNTS = (1, 4, 16, 64)
BIAS_FLOOR = 0.05
BIAS_TOLERANCE = 1e-10
BIAS_SHRINKAGE = 0.6


@dataclass
class CheckResult:
    """Outcome of one audited property"""
    name: str
    property: str
    passed: bool
    seed: int
    detail: str = ""

    def to_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "property": self.property,
            "passed": self.passed,
            "seed": self.seed,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class AuditCheck:
    name: str
    property: str
    run: Callable[[int], Tuple[bool, str]]


def _models(
    seed: int, count: int, n_z: int = 3, n_x: int = 3, floor: float = POSITIVITY_FLOOR
) -> List[Tuple[int, TinyModel, int]]:
    """(index, model, observed symbol) triples, replayable from the seed"""
    out = []
    for i in range(count):
        rng = RngStream.for_purpose(seed, StreamPurpose.ORACLE, i)
        model = random_tiny_model(rng, n_z, n_x, floor)
        out.append((i, model, int(rng.integers(n_x, ()))))
    return out


def _close(a: float, b: float, scale: float = 1.0, tol: float = EXACT_TOLERANCE) -> bool:
    return abs(a - b) <= tol * max(1.0, scale)


# ============== Checks ==============

def check_single_sample_kl(seed: int, n_models: int = 100) -> Tuple[bool, str]:
    """Û¹ − Ŝ¹ equals ln q(z|x) − ln p(z) for every single draw"""
    for i, model, x in _models(seed, n_models, 4, 4):
        enum = enumerate_batches(model, x, 1)
        batch = enum.batch_lik
        kl_est = objective_kl(batch, batch, 0.5).diagnostics["kl_est"]
        lq, lp, ll = (np.asarray(n.value)[:, 0] for n in (batch.log_prop, batch.log_prior, batch.log_lik))
        scale = np.abs(lq) + np.abs(lp) + np.abs(ll)
        bad = np.abs(kl_est - (lq - lp)) > EXACT_TOLERANCE * np.maximum(1.0, scale)
        if np.any(bad):
            z = int(np.argmax(bad))
            return False, f"model {i}, x={x}, z={z}: estimate {kl_est[z]:.15g} vs {lq[z] - lp[z]:.15g}"
    return True, f"{n_models} models, every draw"


def check_single_sample_renyi(seed: int, n_models: int = 100) -> Tuple[bool, str]:
    """The single-sample Rényi estimate equals ln q(z|x) − ln p(z) for any α"""
    for i, model, x in _models(seed, n_models, 4, 4):
        batch = enumerate_batches(model, x, 1).batch_lik
        lq, lp, ll = (np.asarray(n.value)[:, 0] for n in (batch.log_prop, batch.log_prior, batch.log_lik))
        scale = np.abs(lq) + np.abs(lp) + np.abs(ll)
        for alpha in (0.5, 1.5, 2.0, 4.0):
            est = objective_renyi(batch, batch, 0.5, alpha).diagnostics["renyi_est"]
            tol = 1e-11 * np.maximum(1.0, scale * max(alpha, 1.0) / abs(alpha - 1.0))
            if np.any(np.abs(est - (lq - lp)) > tol):
                return False, f"model {i}, x={x}, alpha={alpha}: max error {np.max(np.abs(est - (lq - lp))):.3g}"
    return True, f"{n_models} models, alpha in (0.5, 1.5, 2, 4)"


def check_beta_vae_equivalence(seed: int, n_models: int = 20) -> Tuple[bool, str]:
    """Single-sample KL, Rényi and power objectives have the β-VAE objective as expectation"""
    for i, model, x in _models(seed, n_models):
        for beta in (0.25, 0.5, 1.0, 2.0):
            target = exact_beta_vae(model, x, beta)
            enum = enumerate_batches(model, x, 1)
            b = enum.batch_lik
            weights = np.asarray(enum.weights.value)
            variants = {
                "kl": objective_kl(b, b, 1.0 - beta).value,
                "renyi": objective_renyi(b, b, 1.0 - beta, 1.5).value,
                "power": objective_power(b, 1.0 / beta).value,
            }
            for name, values in variants.items():
                got = float(np.sum(weights * values))
                if abs(got - target) > 1e-10:
                    return False, f"model {i}, x={x}, beta={beta}, {name}: {got:.12g} vs {target:.12g}"
    return True, f"{n_models} models, beta in (0.25, 0.5, 1, 2)"


def _flat_decoder(model: TinyModel) -> TinyModel:
    """Same prior and proposal with p(x|z) independent of z, so Û^K is exact"""
    lik = np.tile(model.likelihood[0], (model.n_z, 1))
    return TinyModel(model.prior, lik, model.proposal)


def check_iwae_bias(seed: int, n_models: int = 20) -> Tuple[bool, str]:
    """
    E[Ŝ^K] ≤ ln p(x) and nondecreasing in K, and E[Û^K − Ŝ^K] converges to
    KL(p(z|x)‖p(z)): it equals the representational KL at K=1, is exact under
    the posterior proposal, and its bias shrinks from K=16 to K=64. Upward
    bias is only checked where Û^K is exact; in general it can go either way.
    """
    total = {16: 0.0, 64: 0.0}
    for i, model, x in _models(seed, n_models, floor=BIAS_FLOOR):
        log_p = exact_marginal(model, x)
        true_kl = exact_posterior_kl(model, x)
        previous = -math.inf
        bias = {}
        for K in BIAS_SAMPLE_COUNTS:
            s = exchangeable_expectation(model, x, EstimatorKind.S_HAT, K)
            if s > log_p + BIAS_TOLERANCE or s < previous - BIAS_TOLERANCE:
                return False, f"model {i}, x={x}, K={K}: E[S]={s:.12g}, ln p={log_p:.12g}, E[S_prev]={previous:.12g}"
            previous = s
            bias[K] = exchangeable_expectation(model, x, EstimatorKind.KL_EST, K) - true_kl

        representational = exact_representational_kl(model, x)
        if not _close(bias[1] + true_kl, representational, representational, BIAS_TOLERANCE):
            return False, f"model {i}, x={x}: K=1 KL estimate {bias[1] + true_kl:.12g} vs KL(q||p(z))={representational:.12g}"
        for K in (16, 64):
            total[K] += abs(bias[K])

        exact_q = model.with_proposal(model.posterior_table())
        for K in BIAS_SAMPLE_COUNTS[:3]:
            kl = exchangeable_expectation(exact_q, x, EstimatorKind.KL_EST, K)
            if not _close(kl, true_kl, true_kl, BIAS_TOLERANCE):
                return False, f"model {i}, x={x}, K={K}: posterior proposal gives E[KL est]={kl:.12g}, KL={true_kl:.12g}"

        flat = _flat_decoder(model)
        previous = math.inf
        for K in BIAS_SAMPLE_COUNTS:
            kl = exchangeable_expectation(flat, x, EstimatorKind.KL_EST, K)
            if kl < -BIAS_TOLERANCE or kl > previous + BIAS_TOLERANCE:
                return False, f"model {i}, x={x}, K={K}: flat decoder E[KL est]={kl:.12g} (previous {previous:.12g})"
            previous = kl

    if total[64] > BIAS_SHRINKAGE * total[16]:
        return False, f"KL estimate bias did not shrink: sum |bias| {total[16]:.6g} at K=16, {total[64]:.6g} at K=64"
    return True, f"{n_models} models, K in {BIAS_SAMPLE_COUNTS} exact; sum |bias| {total[16]:.3g} -> {total[64]:.3g}"


def check_power_bounds(seed: int, n_models: int = 50) -> Tuple[bool, str]:
    """(p(x))^α ≤ p^α(x) ≤ p(x) for α > 1, equality for deterministic decoders, and the D_α identity"""
    for i, model, x in _models(seed, n_models):
        log_p = exact_marginal(model, x)
        for alpha in (1.5, 2.0, 4.0):
            log_pa = exact_p_alpha(model, x, alpha)
            if not (alpha * log_p <= log_pa + EXACT_TOLERANCE and log_pa <= log_p + EXACT_TOLERANCE):
                return False, f"model {i}, x={x}, alpha={alpha}: ln p^a={log_pa:.12g}, ln p={log_p:.12g}"
            d_alpha = exact_renyi(model, x, alpha)
            if not _close(d_alpha, renyi_by_definition(model, x, alpha), abs(log_pa) + alpha * abs(log_p)):
                return False, f"model {i}, x={x}, alpha={alpha}: D_alpha identity off"
    for i in range(n_models):
        model = deterministic_decoder_model(RngStream.for_purpose(seed, StreamPurpose.ORACLE, 20_000 + i))
        for x in range(model.n_x):
            for alpha in (1.5, 2.0, 4.0):
                if exact_p_alpha(model, x, alpha) != exact_marginal(model, x):
                    return False, f"deterministic model {i}, x={x}, alpha={alpha}: p^a != p"
    return True, f"{n_models} random and {n_models} deterministic-decoder models"


def check_renyi_limit(seed: int, n_models: int = 20) -> Tuple[bool, str]:
    """D_α is nondecreasing in α, below the KL for α < 1, above it for α > 1, and approaches it"""
    alphas = (0.5, 0.9, 1.001, 1.01, 1.1, 2.0)
    for i, model, x in _models(seed, n_models):
        kl = exact_posterior_kl(model, x)
        values = [exact_renyi(model, x, a) for a in alphas]
        tol = 1e-10 * max(1.0, kl)
        if any(b < a - tol for a, b in zip(values, values[1:])):
            return False, f"model {i}, x={x}: D_alpha not monotone {values}"
        for a, d in zip(alphas, values):
            if (a < 1.0 and d > kl + tol) or (a > 1.0 and d < kl - tol):
                return False, f"model {i}, x={x}: D_{a}={d:.12g} on the wrong side of KL={kl:.12g}"
        gaps = [abs(d - kl) for a, d in zip(alphas, values) if a > 1.0]
        if gaps[0] > gaps[2] + tol:
            return False, f"model {i}, x={x}: D_alpha does not approach KL as alpha decreases to 1"
    return True, f"{n_models} models, alpha in {alphas}"


def check_gradient_unbiasedness(seed: int, n_models: int = 20) -> Tuple[bool, str]:
    """Enumerated E[surrogate gradient] equals the exact gradient for REINFORCE and VIMCO"""
    objectives = (
        {"objective": ObjectiveKind.NONE},
        {"objective": ObjectiveKind.KL, "lam": 0.5},
        {"objective": ObjectiveKind.RENYI, "lam": 0.5, "alpha": 1.5},
        {"objective": ObjectiveKind.POWER, "alpha": 2.0},
    )
    for i, model, x in _models(seed, n_models):
        for base in (BaseEstimator.REINFORCE, BaseEstimator.VIMCO):
            for extra in objectives:
                config = ObjectiveConfig(
                    base=base, latent_kind=LatentKind.CATEGORICAL, k_lik=2, k_mi=2, **extra
                )
                check = exact_estimator_gradient(model, x, config)
                if check.max_error() > GRADIENT_TOLERANCE or check.max_fd_error() > GRADIENT_TOLERANCE:
                    return False, (
                        f"model {i}, x={x}, {base.value}/{config.objective.value}: "
                        f"surrogate error {check.max_error():.3g}, fd error {check.max_fd_error():.3g}"
                    )
    return True, f"{n_models} models, K=2, |Z|=3, reinforce and vimco over 4 objectives"


def check_u_hat_variance(seed: int, n_models: int = 20) -> Tuple[bool, str]:
    """
    With q = p(z|x), Ŝ^K has zero variance while Û^K keeps Var_p(z|x)[ln p(x|z)] / K > 0
    """
    for i, model, x in _models(seed, n_models):
        exact_q = model.with_proposal(model.posterior_table())
        base_var = exact_estimator_variance(exact_q, x, EstimatorKind.U_HAT, 1)
        if base_var <= 0.0:
            return False, f"model {i}, x={x}: Var[U^1] is zero"
        for K in (1, 2, 3):
            s_var = exact_estimator_variance(exact_q, x, EstimatorKind.S_HAT, K)
            u_var = exact_estimator_variance(exact_q, x, EstimatorKind.U_HAT, K)
            if s_var > 1e-20:
                return False, f"model {i}, x={x}, K={K}: Var[S]={s_var:.3g} with the exact posterior"
            if abs(u_var * K - base_var) > 1e-9 * base_var:
                return False, f"model {i}, x={x}, K={K}: K·Var[U]={u_var * K:.12g} vs {base_var:.12g}"
    return True, f"{n_models} models, K in (1, 2, 3)"


# Complete mapping of audit check names to their implementations
CHECK_REGISTRY: Dict[str, AuditCheck] = {
    "single_sample_kl": AuditCheck("single_sample_kl", "single-sample KL estimate is ln q/p per draw", check_single_sample_kl),
    "single_sample_renyi": AuditCheck("single_sample_renyi", "single-sample Renyi estimate is ln q/p per draw", check_single_sample_renyi),
    "beta_vae_equivalence": AuditCheck("beta_vae_equivalence", "single-sample objectives equal beta-VAE in expectation", check_beta_vae_equivalence),
    "iwae_bias": AuditCheck("iwae_bias", "IWAE bound monotone in K; KL estimate converges to the true KL", check_iwae_bias),
    "power_bounds": AuditCheck("power_bounds", "p^a bounds, deterministic-decoder equality, D_a identity", check_power_bounds),
    "renyi_limit": AuditCheck("renyi_limit", "D_a ordering and KL limit", check_renyi_limit),
    "gradient_unbiasedness": AuditCheck("gradient_unbiasedness", "score-function surrogates are unbiased", check_gradient_unbiasedness),
    "u_hat_variance": AuditCheck("u_hat_variance", "U^K variance decays but never vanishes", check_u_hat_variance),
}


def run_audit(seed: int = 0, names: Optional[Sequence[str]] = None) -> List[CheckResult]:
    """Run the named checks (all by default); exceptions count as failures"""
    selected = list(names) if names else list(CHECK_REGISTRY)
    results = []
    for name in selected:
        check = CHECK_REGISTRY[name]
        try:
            passed, detail = check.run(seed)
        except Exception as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        level = logging.INFO if passed else logging.WARNING
        logger.log(level, "%s seed=%d %s", name, seed, "passed" if passed else "FAILED")
        results.append(CheckResult(name, check.property, passed, seed, detail))
    return results


def format_audit_table(results: Sequence[CheckResult]) -> str:
    """Plain-text table, one row per check"""
    width = max([len(r.name) for r in results] + [5])
    lines = [f"{'check'.ljust(width)}  status  seed  property"]
    for r in results:
        status = "[OK]  " if r.passed else "[FAIL]"
        lines.append(f"{r.name.ljust(width)}  {status}  {r.seed:<4}  {r.property}")
        if not r.passed and r.detail:
            lines.append(f"{''.ljust(width)}          {r.detail}")
    return "\n".join(lines)
