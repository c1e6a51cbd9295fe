"""
Reverse-Mode Differentiation Core
Define-by-run tape over read-only float64 arrays, with an op registry that maps
every op-kind to its forward computation and its backward rule
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import CategoryIndexError, DomainError, NonScalarRootError, ShapeError, UnknownOpError

Tensor = np.ndarray
Operand = Union["NodeRef", float, int, np.ndarray]


def as_tensor(values: Any) -> Tensor:
    """Copy values into a read-only float64 array"""
    arr = np.array(values, dtype=np.float64)
    arr.flags.writeable = False
    return arr


def _freeze(arr: Any) -> Tensor:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.flags.writeable:
        arr.flags.writeable = False
    return arr


# ============== Shape Helpers ==============

def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, dim in enumerate(shape):
        if dim == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad.reshape(shape)


def _keepdims(reduced: np.ndarray, ndim: int, axis: Optional[Union[int, Tuple[int, ...]]]) -> np.ndarray:
    """Reshape a reduced array to its keepdims=True form"""
    if axis is None:
        return np.reshape(reduced, (1,) * ndim)
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(sorted(a % ndim for a in axes))
    return np.expand_dims(reduced, axes)


def _broadcast_shape(op: str, *shapes: Tuple[int, ...]) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(*shapes)
    except ValueError as e:
        raise ShapeError(op, shapes, str(e)) from None


def _check_indices(op: str, indices: np.ndarray, size: int) -> np.ndarray:
    indices = np.asarray(indices)
    if not np.issubdtype(indices.dtype, np.integer):
        raise CategoryIndexError(f"{op}: indices must be integers, got {indices.dtype}")
    if indices.size and (indices.min() < 0 or indices.max() >= size):
        raise CategoryIndexError(
            f"{op}: index out of range [0, {size}) (min={indices.min()}, max={indices.max()})"
        )
    return indices


# ============== Forward / Backward Rules ==============

def _add_fwd(xs, attrs):
    _broadcast_shape("add", xs[0].shape, xs[1].shape)
    return xs[0] + xs[1]


def _add_bwd(g, xs, out, attrs):
    return [_unbroadcast(g, xs[0].shape), _unbroadcast(g, xs[1].shape)]


def _sub_fwd(xs, attrs):
    _broadcast_shape("sub", xs[0].shape, xs[1].shape)
    return xs[0] - xs[1]


def _sub_bwd(g, xs, out, attrs):
    return [_unbroadcast(g, xs[0].shape), _unbroadcast(-g, xs[1].shape)]


def _mul_fwd(xs, attrs):
    _broadcast_shape("mul", xs[0].shape, xs[1].shape)
    return xs[0] * xs[1]


def _mul_bwd(g, xs, out, attrs):
    a, b = xs
    return [_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)]


def _div_fwd(xs, attrs):
    _broadcast_shape("div", xs[0].shape, xs[1].shape)
    if np.any(xs[1] == 0.0):
        raise DomainError("div", "division by zero")
    return xs[0] / xs[1]


def _div_bwd(g, xs, out, attrs):
    a, b = xs
    return [_unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)]


def _matmul_fwd(xs, attrs):
    a, b = xs
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", [a.shape, b.shape])
    _broadcast_shape("matmul", a.shape[:-2], b.shape[:-2])
    return np.matmul(a, b)


def _matmul_bwd(g, xs, out, attrs):
    a, b = xs
    ga = np.matmul(g, np.swapaxes(b, -1, -2))
    gb = np.matmul(np.swapaxes(a, -1, -2), g)
    return [_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)]


def _tanh_bwd(g, xs, out, attrs):
    return [g * (1.0 - out * out)]


def _exp_fwd(xs, attrs):
    with np.errstate(over="ignore"):
        out = np.exp(xs[0])
    if not np.all(np.isfinite(out)):
        raise DomainError("exp", f"overflow (max argument {np.max(xs[0]):.6g})")
    return out


def _log_fwd(xs, attrs):
    if xs[0].size and np.min(xs[0]) <= 0.0:
        raise DomainError("log", f"argument must be positive (min {np.min(xs[0]):.6g})")
    return np.log(xs[0])


def _sum_fwd(xs, attrs):
    return np.sum(xs[0], axis=attrs.get("axis"), keepdims=attrs.get("keepdims", False))


def _sum_bwd(g, xs, out, attrs):
    a = xs[0]
    if not attrs.get("keepdims", False):
        g = _keepdims(g, a.ndim, attrs.get("axis"))
    return [np.broadcast_to(g, a.shape)]


def _mean_fwd(xs, attrs):
    return np.mean(xs[0], axis=attrs.get("axis"), keepdims=attrs.get("keepdims", False))


def _mean_bwd(g, xs, out, attrs):
    a = xs[0]
    count = a.size / max(np.size(out), 1)
    if not attrs.get("keepdims", False):
        g = _keepdims(g, a.ndim, attrs.get("axis"))
    return [np.broadcast_to(g / count, a.shape)]


def _max_fwd(xs, attrs):
    return np.max(xs[0], axis=attrs.get("axis"), keepdims=attrs.get("keepdims", False))


def _max_bwd(g, xs, out, attrs):
    a = xs[0]
    axis = attrs.get("axis")
    keep = attrs.get("keepdims", False)
    out_k = out if keep else _keepdims(out, a.ndim, axis)
    g_k = g if keep else _keepdims(g, a.ndim, axis)
    mask = (a == out_k).astype(np.float64)
    ties = np.sum(mask, axis=axis, keepdims=True)
    return [mask * g_k / ties]


def _logsumexp_fwd(xs, attrs):
    a = xs[0]
    axis = attrs.get("axis")
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = np.sum(np.exp(a - m), axis=axis, keepdims=True)
    out = m + np.log(s)
    if attrs.get("keepdims", False):
        return out
    return np.squeeze(out, axis=axis) if axis is not None else out.reshape(())


def _logsumexp_bwd(g, xs, out, attrs):
    a = xs[0]
    axis = attrs.get("axis")
    keep = attrs.get("keepdims", False)
    out_k = out if keep else _keepdims(out, a.ndim, axis)
    g_k = g if keep else _keepdims(g, a.ndim, axis)
    return [g_k * np.exp(a - out_k)]


def _softmax_log_fwd(xs, attrs):
    a = xs[0]
    axis = attrs.get("axis", -1)
    lse = _logsumexp_fwd([a], {"axis": axis, "keepdims": True})
    return a - lse


def _softmax_log_bwd(g, xs, out, attrs):
    axis = attrs.get("axis", -1)
    return [g - np.exp(out) * np.sum(g, axis=axis, keepdims=True)]


def _embedding_fwd(xs, attrs):
    table = xs[0]
    indices = _check_indices("embedding_lookup", attrs["indices"], table.shape[0])
    return table[indices]


def _embedding_bwd(g, xs, out, attrs):
    grad = np.zeros_like(xs[0])
    np.add.at(grad, np.asarray(attrs["indices"]), g)
    return [grad]


def _pick_shape(op: str, a: np.ndarray, indices: np.ndarray) -> Tuple[int, ...]:
    if a.ndim < 1:
        raise ShapeError(op, [a.shape, indices.shape], "operand needs a last axis")
    return _broadcast_shape(op, a.shape[:-1], indices.shape)


def _pick_fwd(xs, attrs):
    a = xs[0]
    indices = _check_indices("pick", attrs["indices"], a.shape[-1])
    out_shape = _pick_shape("pick", a, indices)
    a_b = np.broadcast_to(a, out_shape + a.shape[-1:])
    idx = np.broadcast_to(indices, out_shape)[..., None]
    return np.take_along_axis(a_b, idx, axis=-1)[..., 0]


def _pick_bwd(g, xs, out, attrs):
    a = xs[0]
    out_shape = g.shape
    idx = np.broadcast_to(np.asarray(attrs["indices"]), out_shape)[..., None]
    grad = np.zeros(out_shape + a.shape[-1:])
    np.put_along_axis(grad, idx, g[..., None], axis=-1)
    return [_unbroadcast(grad, a.shape)]


def _log_softmax_pick_fwd(xs, attrs):
    a = xs[0]
    indices = _check_indices("log_softmax_pick", attrs["indices"], a.shape[-1])
    if indices.shape != a.shape[:-1]:
        raise ShapeError("log_softmax_pick", [a.shape, indices.shape])
    picked = np.take_along_axis(a, indices[..., None], axis=-1)[..., 0]
    return picked - _logsumexp_fwd([a], {"axis": -1})


def _log_softmax_pick_bwd(g, xs, out, attrs):
    a = xs[0]
    idx = np.asarray(attrs["indices"])[..., None]
    lse = np.take_along_axis(a, idx, axis=-1)[..., 0] - out
    grad = np.exp(a - lse[..., None])
    grad *= -g[..., None]
    hit = np.take_along_axis(grad, idx, axis=-1) + g[..., None]
    np.put_along_axis(grad, idx, hit, axis=-1)
    return [grad]


def _concat_fwd(xs, attrs):
    axis = attrs.get("axis", -1)
    try:
        return np.concatenate(xs, axis=axis)
    except ValueError as e:
        raise ShapeError("concat", [x.shape for x in xs], str(e)) from None


def _concat_bwd(g, xs, out, attrs):
    axis = attrs.get("axis", -1)
    sizes = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return list(np.split(g, sizes, axis=axis))


def _broadcast_fwd(xs, attrs):
    shape = tuple(attrs["shape"])
    try:
        return np.broadcast_to(xs[0], shape)
    except ValueError:
        raise ShapeError("broadcast", [xs[0].shape, shape]) from None


def _reshape_fwd(xs, attrs):
    shape = tuple(attrs["shape"])
    try:
        return np.reshape(xs[0], shape)
    except ValueError:
        raise ShapeError("reshape", [xs[0].shape, shape]) from None


def _clip_bwd(g, xs, out, attrs):
    a = xs[0]
    inside = (a >= attrs["low"]) & (a <= attrs["high"])
    return [g * inside]


@dataclass(frozen=True)
class OpSpec:
    """Forward computation and backward rule for one op-kind"""
    forward: Callable[[List[np.ndarray], Dict[str, Any]], np.ndarray]
    backward: Callable[[np.ndarray, List[np.ndarray], np.ndarray, Dict[str, Any]], List[Optional[np.ndarray]]]
    arity: Optional[int] = 1


# Complete mapping of op-kinds to their rules
OP_REGISTRY: Dict[str, OpSpec] = {
    # ========== BINARY (broadcasting) ==========
    "add": OpSpec(_add_fwd, _add_bwd, 2),
    "sub": OpSpec(_sub_fwd, _sub_bwd, 2),
    "mul": OpSpec(_mul_fwd, _mul_bwd, 2),
    "div": OpSpec(_div_fwd, _div_bwd, 2),
    "matmul": OpSpec(_matmul_fwd, _matmul_bwd, 2),

    # ========== ELEMENTWISE ==========
    "tanh": OpSpec(lambda xs, at: np.tanh(xs[0]), _tanh_bwd),
    "exp": OpSpec(_exp_fwd, lambda g, xs, out, at: [g * out]),
    "log": OpSpec(_log_fwd, lambda g, xs, out, at: [g / xs[0]]),
    "square": OpSpec(lambda xs, at: xs[0] * xs[0], lambda g, xs, out, at: [2.0 * xs[0] * g]),
    "scale": OpSpec(lambda xs, at: xs[0] * at["factor"], lambda g, xs, out, at: [g * at["factor"]]),
    "negate": OpSpec(lambda xs, at: -xs[0], lambda g, xs, out, at: [-g]),
    "clip": OpSpec(lambda xs, at: np.clip(xs[0], at["low"], at["high"]), _clip_bwd),

    # ========== REDUCTIONS ==========
    "sum": OpSpec(_sum_fwd, _sum_bwd),
    "mean": OpSpec(_mean_fwd, _mean_bwd),
    "max": OpSpec(_max_fwd, _max_bwd),
    "logsumexp": OpSpec(_logsumexp_fwd, _logsumexp_bwd),
    "softmax_log": OpSpec(_softmax_log_fwd, _softmax_log_bwd),

    # ========== INDEXING / LAYOUT ==========
    "embedding_lookup": OpSpec(_embedding_fwd, _embedding_bwd),
    "pick": OpSpec(_pick_fwd, _pick_bwd),
    "log_softmax_pick": OpSpec(_log_softmax_pick_fwd, _log_softmax_pick_bwd),
    "concat": OpSpec(_concat_fwd, _concat_bwd, None),
    "broadcast": OpSpec(_broadcast_fwd, lambda g, xs, out, at: [_unbroadcast(g, xs[0].shape)]),
    "reshape": OpSpec(_reshape_fwd, lambda g, xs, out, at: [np.reshape(g, xs[0].shape)]),
}


# ============== Tape and Nodes ==============

@dataclass(eq=False, repr=False)
class NodeRef:
    """Handle to one recorded value on a Tape"""
    id: int
    value: Tensor
    requires_grad: bool
    grad_blocked: bool
    tape: "Tape"
    op: Optional[str] = None
    parents: Tuple["NodeRef", ...] = ()
    attrs: Dict[str, Any] = field(default_factory=dict)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def is_leaf(self) -> bool:
        return self.op is None

    def item(self) -> float:
        return float(self.value.reshape(-1)[0]) if self.value.size == 1 else float("nan")

    def __repr__(self) -> str:
        kind = self.op or ("blocked" if self.grad_blocked else "leaf")
        return f"NodeRef(id={self.id}, op={kind}, shape={self.shape})"

    # ---------- arithmetic ----------
    def _lift(self, other: Operand) -> "NodeRef":
        if isinstance(other, NodeRef):
            return other
        return self.tape.constant(other)

    def __add__(self, other): return forward_op("add", [self, self._lift(other)])
    def __radd__(self, other): return forward_op("add", [self._lift(other), self])
    def __sub__(self, other): return forward_op("sub", [self, self._lift(other)])
    def __rsub__(self, other): return forward_op("sub", [self._lift(other), self])
    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return forward_op("scale", [self], factor=float(other))
        return forward_op("mul", [self, self._lift(other)])
    def __rmul__(self, other): return self.__mul__(other)
    def __truediv__(self, other):
        if isinstance(other, (int, float)) and other != 0:
            return forward_op("scale", [self], factor=1.0 / float(other))
        return forward_op("div", [self, self._lift(other)])
    def __rtruediv__(self, other): return forward_op("div", [self._lift(other), self])
    def __neg__(self): return forward_op("negate", [self])
    def __matmul__(self, other): return forward_op("matmul", [self, self._lift(other)])

    # ---------- unary / reductions ----------
    def exp(self): return forward_op("exp", [self])
    def log(self): return forward_op("log", [self])
    def tanh(self): return forward_op("tanh", [self])
    def square(self): return forward_op("square", [self])
    def sum(self, axis=None, keepdims=False): return forward_op("sum", [self], axis=axis, keepdims=keepdims)
    def mean(self, axis=None, keepdims=False): return forward_op("mean", [self], axis=axis, keepdims=keepdims)
    def max(self, axis=None, keepdims=False): return forward_op("max", [self], axis=axis, keepdims=keepdims)
    def logsumexp(self, axis=None, keepdims=False):
        return forward_op("logsumexp", [self], axis=axis, keepdims=keepdims)
    def log_softmax(self, axis=-1): return forward_op("softmax_log", [self], axis=axis)
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return forward_op("reshape", [self], shape=tuple(shape))
    def clip(self, low: float, high: float): return forward_op("clip", [self], low=low, high=high)


class Tape:
    """
    Ordered record of operations for one forward pass
    Nodes are appended in creation order, so reversed order is a valid
    reverse topological order for backward traversal.
    """

    def __init__(self):
        self.nodes: List[NodeRef] = []
        self._named: Dict[Any, NodeRef] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def _record(
        self,
        value: np.ndarray,
        requires_grad: bool,
        grad_blocked: bool = False,
        op: Optional[str] = None,
        parents: Tuple[NodeRef, ...] = (),
        attrs: Optional[Dict[str, Any]] = None,
    ) -> NodeRef:
        node = NodeRef(
            id=len(self.nodes),
            value=_freeze(value),
            requires_grad=requires_grad,
            grad_blocked=grad_blocked,
            tape=self,
            op=op,
            parents=parents,
            attrs=attrs or {},
        )
        self.nodes.append(node)
        return node

    def leaf(self, value: Any, requires_grad: bool = True) -> NodeRef:
        return self._record(np.array(value, dtype=np.float64), requires_grad)

    def constant(self, value: Any) -> NodeRef:
        return self._record(np.array(value, dtype=np.float64), requires_grad=False)

    def named_leaf(self, key: Any, value: Any, requires_grad: bool = True) -> NodeRef:
        """Leaf registered under key; later calls with the same key reuse it"""
        if key not in self._named:
            self._named[key] = self.leaf(value, requires_grad)
        return self._named[key]

    def op(self, name: str, *inputs: NodeRef, **attrs: Any) -> NodeRef:
        return forward_op(name, list(inputs), **attrs)

    def backward(self, root: NodeRef, wrt: Optional[Iterable[NodeRef]] = None) -> Dict[NodeRef, Tensor]:
        return backward(self, root, wrt)


# ============== Public Operations ==============

def forward_op(name: str, inputs: Sequence[NodeRef], **attrs: Any) -> NodeRef:
    """
    Evaluate op-kind `name` on inputs and record its backward rule

    Args:
        name: Registered op-kind
        inputs: Operand nodes, all on the same tape
        attrs: Op attributes (axis, indices, factor, shape, ...)

    Returns:
        The node holding the result
    """
    spec = OP_REGISTRY.get(name)
    if spec is None:
        raise UnknownOpError(f"unknown op-kind '{name}' (known: {sorted(OP_REGISTRY)})")
    if not inputs:
        raise ShapeError(name, [], "op needs at least one input")
    if spec.arity is not None and len(inputs) != spec.arity:
        raise ShapeError(name, [x.shape for x in inputs], f"expected {spec.arity} inputs")
    tape = inputs[0].tape
    if any(x.tape is not tape for x in inputs):
        raise ValueError(f"{name}: inputs belong to different tapes")

    values = [x.value for x in inputs]
    with np.errstate(invalid="ignore", divide="ignore"):
        value = spec.forward(values, attrs)
    requires_grad = any(x.requires_grad for x in inputs)
    return tape._record(value, requires_grad, op=name, parents=tuple(inputs), attrs=attrs)


def stop_gradient(x: NodeRef) -> NodeRef:
    """Same value as x; contributes zero to every gradient it feeds"""
    return x.tape._record(x.value, requires_grad=False, grad_blocked=True)


def backward(tape: Tape, root: NodeRef, wrt: Optional[Iterable[NodeRef]] = None) -> Dict[NodeRef, Tensor]:
    """
    Gradient of a scalar root with respect to every requires_grad leaf

    Leaves that the root does not depend on are reported with zero gradients.
    """
    if root.tape is not tape:
        raise ValueError("backward: root does not belong to this tape")
    if root.value.size != 1:
        raise NonScalarRootError(f"backward needs a scalar root, got shape {root.shape}")

    grads: Dict[int, np.ndarray] = {}
    if root.requires_grad:
        grads[root.id] = np.ones_like(root.value)

    leaf_grads: Dict[int, np.ndarray] = {}
    for node in reversed(tape.nodes[: root.id + 1]):
        g = grads.pop(node.id, None)
        if g is None:
            continue
        if node.is_leaf:
            leaf_grads[node.id] = g
            continue
        spec = OP_REGISTRY[node.op]
        parent_values = [p.value for p in node.parents]
        parent_grads = spec.backward(g, parent_values, node.value, node.attrs)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if parent.id in grads:
                grads[parent.id] = grads[parent.id] + pg
            else:
                grads[parent.id] = np.array(pg, dtype=np.float64)

    targets = list(wrt) if wrt is not None else [n for n in tape.nodes if n.is_leaf and n.requires_grad]
    return {
        leaf: _freeze(leaf_grads.get(leaf.id, np.zeros_like(leaf.value)))
        for leaf in targets
    }


# ---------- functional spellings used throughout the estimators ----------

def logsumexp(x: NodeRef, axis: Optional[int] = None, keepdims: bool = False) -> NodeRef:
    return forward_op("logsumexp", [x], axis=axis, keepdims=keepdims)


def softmax_log(x: NodeRef, axis: int = -1) -> NodeRef:
    return forward_op("softmax_log", [x], axis=axis)


def embedding_lookup(table: NodeRef, indices: np.ndarray) -> NodeRef:
    return forward_op("embedding_lookup", [table], indices=np.asarray(indices))


def pick(x: NodeRef, indices: np.ndarray) -> NodeRef:
    """x[..., indices] along the last axis, broadcasting indices against x's leading axes"""
    return forward_op("pick", [x], indices=np.asarray(indices))


def log_softmax_pick(logits: NodeRef, indices: np.ndarray) -> NodeRef:
    """softmax_log(logits)[..., indices] without materialising the full log-softmax"""
    return forward_op("log_softmax_pick", [logits], indices=np.asarray(indices))


def concat(nodes: Sequence[NodeRef], axis: int = -1) -> NodeRef:
    return forward_op("concat", list(nodes), axis=axis)


def broadcast(x: NodeRef, shape: Sequence[int]) -> NodeRef:
    return forward_op("broadcast", [x], shape=tuple(shape))


def softmax_weights(log_weights: NodeRef, axis: int = -1) -> NodeRef:
    """Normalised weights exp(ℓ − logsumexp ℓ)"""
    return softmax_log(log_weights, axis=axis).exp()
