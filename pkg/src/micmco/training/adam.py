"""
Adam Optimizer
Bias-corrected Adam over named parameter tensors, plus the L2 weight penalty
"""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from ..engine.diffcore import NodeRef, Tape
from ..errors import ConfigError, NonFiniteGradientError, ShapeError
from ..modeling.models import ModelParams


@dataclass
class AdamState:
    """Moment accumulators keyed by parameter name"""
    lr: float
    beta1: float = 0.0
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0.0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}", key="lr")


def adam_update(
    state: AdamState,
    values: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
) -> Dict[str, np.ndarray]:
    """
    One Adam step on plain arrays; returns new arrays and advances state

    Every gradient is checked before anything is touched, so a rejected step
    leaves both the state and the values as they were.
    """
    for name, value in values.items():
        if name not in grads:
            raise ShapeError("adam_step", [np.shape(value)], f"no gradient for '{name}'")
        g = grads[name]
        if np.shape(g) != np.shape(value):
            raise ShapeError("adam_step", [np.shape(value), np.shape(g)], name)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name)

    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t

    updated = {}
    for name, value in values.items():
        g = np.asarray(grads[name], dtype=np.float64)
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1.0 - state.beta1) * g if m is None else state.beta1 * m + (1.0 - state.beta1) * g
        v = (1.0 - state.beta2) * (g * g) if v is None else state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        m_hat = m / bc1
        v_hat = v / bc2
        updated[name] = value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return updated


def adam_step(
    state: AdamState,
    params: ModelParams,
    grads: Mapping[str, np.ndarray],
) -> Tuple[ModelParams, AdamState]:
    """Adam update of every tensor in params; NaN or inf gradients raise NonFiniteGradientError"""
    values = {name: params[name] for name in params.names()}
    return params.replace_values(adam_update(state, values, grads)), state


def l2_penalty(params: ModelParams, coefficient: float, tape: Optional[Tape] = None) -> NodeRef:
    """coefficient · Σ w² over every weight tensor; biases are excluded"""
    if coefficient < 0.0:
        raise ConfigError(f"must be non-negative, got {coefficient}", key="l2")
    tape = tape if tape is not None else Tape()
    if coefficient == 0.0:
        return tape.constant(0.0)
    nodes = params.bind(tape)
    total: Optional[NodeRef] = None
    for entry in params.entries:
        if entry.is_bias:
            continue
        term = nodes[entry.name].square().sum()
        total = term if total is None else total + term
    if total is None:
        return tape.constant(0.0)
    return total * coefficient
