"""
Gradient Surrogates
Scalar tape roots whose gradients implement the selected gradient estimator:
plain reparameterization, STL, DReG, REINFORCE and VIMCO
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp as np_logsumexp
from scipy.special import softmax as np_softmax

from ..engine.diffcore import NodeRef, Tape, backward, stop_gradient
from ..errors import ConfigError
from ..modeling.models import ModelParams, ParamGroup
from .composite import EstimatorOutput, Term, TermKind, combine, term_value
from .config import BaseEstimator, ObjectiveConfig
from .log_weights import LogWeightBatch


@dataclass(eq=False)
class Surrogate:
    """
    Roots to differentiate, one per parameter group

    theta_root and phi_root are the same node for every estimator except DReG,
    whose φ-gradient comes from a differently weighted expression.
    """
    theta_root: NodeRef
    phi_root: NodeRef

    @property
    def shared(self) -> bool:
        return self.theta_root is self.phi_root

    def map(self, fn: Callable[[NodeRef], NodeRef]) -> "Surrogate":
        """Apply fn to both roots (once when they are shared)"""
        theta = fn(self.theta_root)
        phi = theta if self.shared else fn(self.phi_root)
        return Surrogate(theta, phi)


# ============== Per-example surrogates ==============

def _reduce(per_example: NodeRef, example_weights: Optional[np.ndarray]) -> NodeRef:
    if example_weights is None:
        return per_example.mean()
    if isinstance(example_weights, NodeRef):
        return (per_example * example_weights).sum()
    return (per_example * np.asarray(example_weights, dtype=np.float64)).sum()


def _dreg_phi_terms(terms: List[Term], base: BaseEstimator, alpha: float) -> NodeRef:
    """Σ coefficient · DReG φ-expression; Û terms stay plainly reparameterized"""
    total: Optional[NodeRef] = None
    for term in terms:
        if term.kind is TermKind.U:
            value = term_value(term.kind, term.batch, base, alpha)
        else:
            a = alpha if term.kind is TermKind.S_ALPHA else 1.0
            log_w = term.batch.log_weights_alpha(a)
            weights = stop_gradient(log_w.log_softmax(axis=-1).exp())
            path_log_w = term.batch.path_only().log_weights_alpha(a)
            value = (weights.square() * path_log_w).sum(axis=-1)
        if term.coefficient != 1.0:
            value = value * term.coefficient
        total = value if total is None else total + value
    return total


def _dreg_theta_terms(terms: List[Term], base: BaseEstimator, alpha: float) -> NodeRef:
    total: Optional[NodeRef] = None
    for term in terms:
        if term.kind is TermKind.U:
            value = term_value(term.kind, term.batch, base, alpha)
        else:
            a = alpha if term.kind is TermKind.S_ALPHA else 1.0
            log_w = term.batch.log_weights_alpha(a)
            weights = stop_gradient(log_w.log_softmax(axis=-1).exp())
            value = (weights * log_w).sum(axis=-1)
        if term.coefficient != 1.0:
            value = value * term.coefficient
        total = value if total is None else total + value
    return total


def _group_by_batch(terms: List[Term]) -> List[List[Term]]:
    groups: List[List[Term]] = []
    for term in terms:
        for group in groups:
            if group[0].batch is term.batch:
                group.append(term)
                break
        else:
            groups.append([term])
    return groups


def _term_array(kind: TermKind, alpha: float, log_lik: np.ndarray, log_w_base: np.ndarray) -> np.ndarray:
    """Numeric term value over the last axis; log_w_base = ln p(z) − ln q(z|x)"""
    K = log_lik.shape[-1]
    if kind is TermKind.U:
        weights = np_softmax(log_lik + log_w_base, axis=-1)
        return np.sum(weights * log_lik, axis=-1)
    a = alpha if kind is TermKind.S_ALPHA else 1.0
    return np_logsumexp(a * log_lik + log_w_base, axis=-1) - np.log(K)


def _leave_one_out(values: np.ndarray) -> np.ndarray:
    """(B, K) → (B, K, K): row i is values with entry i replaced by the mean of the others"""
    B, K = values.shape
    others = (values.sum(axis=-1, keepdims=True) - values) / (K - 1)
    out = np.repeat(values[:, None, :], K, axis=1)
    idx = np.arange(K)
    out[:, idx, idx] = others
    return out


def vimco_baselines(terms: List[Term], alpha: float) -> np.ndarray:
    """
    Leave-one-out baselines b_i (B, K) for the terms sharing one batch

    b_i recomputes Σ coefficient·term with sample i's log-likelihood and
    ln p(z_i) − ln q(z_i|x) replaced by the arithmetic mean over the others.
    """
    batch = terms[0].batch
    log_lik = _leave_one_out(np.asarray(batch.log_lik.value))
    log_w_base = _leave_one_out(np.asarray(batch.log_prior.value - batch.log_prop.value))
    total = np.zeros(log_lik.shape[:2])
    for term in terms:
        total = total + term.coefficient * _term_array(term.kind, alpha, log_lik, log_w_base)
    return total


def _score_function(terms: List[Term], output: EstimatorOutput, leave_one_out: bool) -> NodeRef:
    """Σ over batches of Σ_i stop_gradient(signal − b_i) · ln q(z_i|x)"""
    total: Optional[NodeRef] = None
    for group in _group_by_batch(terms):
        batch = group[0].batch
        signal = np.asarray(combine(group, output.base, output.alpha).value)
        learning = np.repeat(signal[:, None], batch.K, axis=1)
        if leave_one_out:
            learning = learning - vimco_baselines(group, output.alpha)
        carrier = (batch.log_prop * batch.log_prop.tape.constant(learning)).sum(axis=-1)
        total = carrier if total is None else total + carrier
    return total


def build_surrogate(
    config: ObjectiveConfig,
    output: EstimatorOutput,
    example_weights: Optional[np.ndarray] = None,
) -> Surrogate:
    """
    Roots whose gradients implement config.base for the objective in output

    Args:
        config: Objective configuration; its base selects the estimator
        output: Result of evaluate_objective on the drawn batches
        example_weights: Per-example weights replacing the batch mean by a
            weighted sum (exact expectations over enumerated tuples)

    Returns:
        Surrogate, also attached to output.surrogate
    """
    base = config.base
    if base is not output.base:
        raise ConfigError(f"output was built for base '{output.base.value}'", key="base")
    terms = [t for t in output.terms if t.coefficient != 0.0]

    if base in (BaseEstimator.ELBO_ANALYTIC, BaseEstimator.ELBO_SAMPLED, BaseEstimator.IWAE):
        root = _reduce(output.expression, example_weights)
        surrogate = Surrogate(root, root)
    elif base is BaseEstimator.STL:
        path_terms = [Term(t.kind, t.coefficient, t.batch.path_only()) for t in terms]
        root = _reduce(combine(path_terms, base, output.alpha), example_weights)
        surrogate = Surrogate(root, root)
    elif base is BaseEstimator.DREG:
        theta = _reduce(_dreg_theta_terms(terms, base, output.alpha), example_weights)
        phi = _reduce(_dreg_phi_terms(terms, base, output.alpha), example_weights)
        surrogate = Surrogate(theta, phi)
    else:
        leave_one_out = base is BaseEstimator.VIMCO
        per_example = output.expression + _score_function(terms, output, leave_one_out)
        root = _reduce(per_example, example_weights)
        surrogate = Surrogate(root, root)

    output.surrogate = surrogate
    return surrogate


def surrogate_gradients(
    surrogate: Surrogate,
    params: ModelParams,
    tape: Tape,
    penalty: Optional[NodeRef] = None,
    sign: float = 1.0,
) -> Dict[str, np.ndarray]:
    """
    Gradients of sign·root (+ penalty) by parameter name

    With distinct roots, θ-tensors take their gradient from theta_root and
    φ-tensors from phi_root.
    """
    nodes = params.bind(tape)

    def loss(root: NodeRef) -> NodeRef:
        out = root * sign if sign != 1.0 else root
        return out + penalty if penalty is not None else out

    roots = surrogate.map(loss)
    if roots.shared:
        grads = backward(tape, roots.theta_root, wrt=nodes.values())
        return {name: grads[node] for name, node in nodes.items()}

    result: Dict[str, np.ndarray] = {}
    for group, root in ((ParamGroup.THETA, roots.theta_root), (ParamGroup.PHI, roots.phi_root)):
        names = params.names(group)
        grads = backward(tape, root, wrt=[nodes[n] for n in names])
        for name in names:
            result[name] = grads[nodes[name]]
    return {name: result[name] for name in params.names()}
