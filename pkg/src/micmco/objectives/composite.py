"""
Composite Objectives
The plain, KL, Rényi and power objectives as weighted sums of Ŝ, Ŝ_α and Û terms
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from ..engine.diffcore import NodeRef
from .config import BaseEstimator, ObjectiveConfig, ObjectiveKind
from .estimators import (
    renyi_estimate,
    s_hat_elbo,
    s_hat_elbo_analytic,
    s_hat_iwae,
    s_hat_alpha,
    u_hat,
)
from .log_weights import LogWeightBatch


class TermKind(Enum):
    """Building blocks of every composite objective"""
    S = "s"              # Ŝ, estimate of ln p(x)
    S_ALPHA = "s_alpha"  # Ŝ_α, estimate of ln p^α(x)
    U = "u"              # Û, estimate of E_p(z|x)[ln p(x|z)]


@dataclass(eq=False)
class Term:
    """coefficient · kind(batch)"""
    kind: TermKind
    coefficient: float
    batch: LogWeightBatch


def term_value(
    kind: TermKind,
    batch: LogWeightBatch,
    base: BaseEstimator = BaseEstimator.IWAE,
    alpha: float = 1.0,
) -> NodeRef:
    """(B,) value of one term, aggregated the way the base estimator does it"""
    if kind is TermKind.U:
        return u_hat(batch)
    a = alpha if kind is TermKind.S_ALPHA else 1.0
    if base is BaseEstimator.ELBO_ANALYTIC:
        return s_hat_elbo_analytic(batch, a)
    if base is BaseEstimator.ELBO_SAMPLED:
        return s_hat_elbo(batch, a)
    return s_hat_iwae(batch) if a == 1.0 else s_hat_alpha(batch, a)


def combine(terms: List[Term], base: BaseEstimator, alpha: float) -> NodeRef:
    """Σ coefficient · term, evaluated term by term"""
    total: Optional[NodeRef] = None
    for term in terms:
        value = term_value(term.kind, term.batch, base, alpha)
        if term.coefficient != 1.0:
            value = value * term.coefficient
        total = value if total is None else total + value
    return total


@dataclass(eq=False)
class EstimatorOutput:
    """
    Objective estimate on one set of samples

    value holds the per-example estimates (B,) and never includes score-function
    or baseline terms; expression is the same quantity as a tape node. The
    surrogate is attached by build_surrogate.
    """
    value: np.ndarray
    expression: NodeRef
    terms: List[Term]
    base: BaseEstimator
    alpha: float
    diagnostics: Dict[str, np.ndarray] = field(default_factory=dict)
    surrogate: Any = None

    @property
    def mean_value(self) -> float:
        return float(np.mean(self.value))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.mean_value,
            "base": self.base.value,
            "diagnostics": {k: float(np.mean(v)) for k, v in self.diagnostics.items()},
        }


def _finish(
    terms: List[Term],
    base: BaseEstimator,
    alpha: float,
    diagnostics: Dict[str, NodeRef],
    extra: Optional[Dict[str, float]] = None,
) -> EstimatorOutput:
    expression = combine(terms, base, alpha)
    diag = {name: np.array(node.value) for name, node in diagnostics.items()}
    for name, scalar in (extra or {}).items():
        diag[name] = np.full(expression.shape, scalar)
    return EstimatorOutput(
        value=np.array(expression.value),
        expression=expression,
        terms=terms,
        base=base,
        alpha=alpha,
        diagnostics=diag,
    )


# ============== Objectives ==============

def objective_plain(batch_lik: LogWeightBatch, base: BaseEstimator = BaseEstimator.IWAE) -> EstimatorOutput:
    """Ŝ alone"""
    terms = [Term(TermKind.S, 1.0, batch_lik)]
    s_hat = term_value(TermKind.S, batch_lik, base)
    return _finish(terms, base, 1.0, {"s_hat": s_hat})


def objective_kl(
    batch_lik: LogWeightBatch,
    batch_mi: LogWeightBatch,
    lam: float,
    base: BaseEstimator = BaseEstimator.IWAE,
) -> EstimatorOutput:
    """(1 − λ) Ŝ(batch_lik) + λ Û(batch_mi)"""
    terms = [
        Term(TermKind.S, 1.0 - lam, batch_lik),
        Term(TermKind.U, lam, batch_mi),
    ]
    s_hat = term_value(TermKind.S, batch_lik, base)
    s_hat_mi = s_hat if batch_mi is batch_lik else term_value(TermKind.S, batch_mi, base)
    u = u_hat(batch_mi)
    diagnostics = {"s_hat": s_hat, "u_hat": u, "kl_est": u - s_hat_mi}
    return _finish(terms, base, 1.0, diagnostics)


def objective_renyi(
    batch_lik: LogWeightBatch,
    batch_alpha: LogWeightBatch,
    lam: float,
    alpha: float,
    base: BaseEstimator = BaseEstimator.IWAE,
) -> EstimatorOutput:
    """(λ/(α−1)) Ŝ_α(batch_alpha) − (λα/(α−1) − 1) Ŝ(batch_lik)"""
    terms = [
        Term(TermKind.S_ALPHA, lam / (alpha - 1.0), batch_alpha),
        Term(TermKind.S, -(lam * alpha / (alpha - 1.0) - 1.0), batch_lik),
    ]
    s_hat = term_value(TermKind.S, batch_lik, base)
    s_hat_a = s_hat if batch_alpha is batch_lik else term_value(TermKind.S, batch_alpha, base)
    s_alpha = term_value(TermKind.S_ALPHA, batch_alpha, base, alpha)
    diagnostics = {
        "s_hat": s_hat,
        "s_alpha_hat": s_alpha,
        "renyi_est": renyi_estimate(s_alpha, s_hat_a, alpha),
    }
    return _finish(terms, base, alpha, diagnostics)


def objective_power(
    batch_alpha: LogWeightBatch,
    alpha: float,
    base: BaseEstimator = BaseEstimator.IWAE,
) -> EstimatorOutput:
    """α⁻¹ Ŝ_α, the Rényi objective at λ = (α−1)/α"""
    terms = [Term(TermKind.S_ALPHA, 1.0 / alpha, batch_alpha)]
    s_alpha = term_value(TermKind.S_ALPHA, batch_alpha, base, alpha)
    return _finish(
        terms, base, alpha,
        {"s_alpha_hat": s_alpha},
        extra={"implied_lambda": (alpha - 1.0) / alpha},
    )


def evaluate_objective(
    config: ObjectiveConfig,
    batch_lik: LogWeightBatch,
    batch_mi: Optional[LogWeightBatch] = None,
) -> EstimatorOutput:
    """Dispatch on config.objective; batch_mi defaults to batch_lik"""
    batch_mi = batch_lik if batch_mi is None else batch_mi
    if config.objective is ObjectiveKind.KL:
        return objective_kl(batch_lik, batch_mi, config.lam, config.base)
    if config.objective is ObjectiveKind.RENYI:
        return objective_renyi(batch_lik, batch_mi, config.lam, config.alpha, config.base)
    if config.objective is ObjectiveKind.POWER:
        return objective_power(batch_lik, config.alpha, config.base)
    return objective_plain(batch_lik, config.base)
