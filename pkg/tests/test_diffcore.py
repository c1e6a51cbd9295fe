"""
Tests for the differentiation core: forward values, backward rules against
central differences, domain and shape errors
"""

import numpy as np
import pytest
from scipy.special import log_softmax as sp_log_softmax
from scipy.special import logsumexp as sp_logsumexp

from micmco.engine import (
    OP_REGISTRY,
    Tape,
    backward,
    embedding_lookup,
    forward_op,
    log_softmax_pick,
    logsumexp,
    pick,
    softmax_log,
    stop_gradient,
)
from micmco.errors import (
    CategoryIndexError,
    DomainError,
    NonScalarRootError,
    ShapeError,
    UnknownOpError,
)


def _grad_of(build, value):
    tape = Tape()
    x = tape.leaf(value)
    root = build(x)
    return root.item(), backward(tape, root)[x]


def _value_of(build):
    def f(v):
        tape = Tape()
        return build(tape.leaf(v)).item()
    return f


# ============== Forward values ==============

def test_arithmetic_forward(tape):
    a = tape.leaf([[1.0, 2.0], [3.0, 4.0]])
    b = tape.leaf([10.0, 20.0])
    np.testing.assert_array_equal((a + b).value, [[11.0, 22.0], [13.0, 24.0]])
    np.testing.assert_array_equal((a * 2).value, [[2.0, 4.0], [6.0, 8.0]])
    np.testing.assert_array_equal((a @ a).value, np.array([[7.0, 10.0], [15.0, 22.0]]))
    np.testing.assert_array_equal((-a).value, -np.array([[1.0, 2.0], [3.0, 4.0]]))


def test_values_are_read_only(tape):
    x = tape.leaf([1.0, 2.0])
    with pytest.raises(ValueError):
        x.value[0] = 5.0


def test_logsumexp_is_stable_for_large_inputs(tape):
    x = tape.leaf([1000.0, 1000.0])
    assert logsumexp(x, axis=-1).item() == pytest.approx(1000.0 + np.log(2.0), abs=1e-12)
    y = tape.leaf([-1000.0, -1000.0, -1000.0])
    assert logsumexp(y, axis=-1).item() == pytest.approx(-1000.0 + np.log(3.0), abs=1e-12)


def test_softmax_log_matches_scipy(tape):
    values = np.array([[0.3, -1.2, 2.5], [4.0, 4.0, -3.0]])
    out = softmax_log(tape.leaf(values), axis=-1)
    np.testing.assert_allclose(out.value, sp_log_softmax(values, axis=-1), rtol=0, atol=1e-12)


def test_log_softmax_pick_matches_unfused(tape):
    logits = np.random.default_rng(0).normal(size=(4, 7))
    idx = np.array([0, 6, 3, 3])
    fused = log_softmax_pick(tape.leaf(logits), idx).value
    expected = sp_log_softmax(logits, axis=-1)[np.arange(4), idx]
    np.testing.assert_allclose(fused, expected, atol=1e-13)


def test_pick_broadcasts_indices(tape):
    table = tape.leaf(np.arange(6.0))
    out = pick(table, np.array([[0, 5], [2, 2]]))
    np.testing.assert_array_equal(out.value, [[0.0, 5.0], [2.0, 2.0]])


# ============== Backward rules ==============

@pytest.mark.parametrize("name, build", [
    ("square-sum", lambda x: x.square().sum()),
    ("tanh", lambda x: x.tanh().sum()),
    ("exp-log", lambda x: (x.exp() + 1.0).log().sum()),
    ("div", lambda x: (1.0 / (x.square() + 1.0)).sum()),
    ("mean", lambda x: (x * x).mean()),
    ("logsumexp", lambda x: logsumexp(x * 3.0, axis=-1).sum()),
    ("log_softmax", lambda x: pick(softmax_log(x, axis=-1), np.array([1, 0])).sum()),
    ("clip", lambda x: (x.clip(-0.5, 0.5) * x).sum()),
    ("reshape", lambda x: (x.reshape(3, 2) @ x.reshape(2, 3)).sum()),
])
def test_gradients_match_central_differences(name, build, numeric_grad):
    value = np.array([[0.3, -0.2, 0.9], [-1.1, 0.4, 0.05]])
    _, analytic = _grad_of(build, value)
    np.testing.assert_allclose(analytic, numeric_grad(_value_of(build), value), rtol=1e-6, atol=1e-8)


def test_matmul_gradient(numeric_grad):
    w = np.array([[0.5, -1.0], [2.0, 0.25], [0.1, 0.3]])
    x = np.array([[1.0, 2.0, 3.0]])

    def build(node):
        return (node.tape.constant(x) @ node).tanh().sum()

    _, analytic = _grad_of(build, w)
    np.testing.assert_allclose(analytic, numeric_grad(_value_of(build), w), rtol=1e-6, atol=1e-9)


def test_broadcast_add_reduces_gradient(tape):
    a = tape.leaf(np.ones((2, 3)))
    b = tape.leaf(np.ones(3))
    grads = backward(tape, (a + b).sum())
    np.testing.assert_array_equal(grads[b], [2.0, 2.0, 2.0])
    np.testing.assert_array_equal(grads[a], np.ones((2, 3)))


def test_fan_out_accumulates(tape):
    x = tape.leaf(3.0)
    grads = backward(tape, x * x + x)
    assert grads[x] == pytest.approx(7.0)


def test_max_splits_ties_equally(tape):
    x = tape.leaf([1.0, 3.0, 3.0])
    grads = backward(tape, x.max())
    np.testing.assert_array_equal(grads[x], [0.0, 0.5, 0.5])


def test_embedding_gradient_accumulates_repeated_rows(tape):
    table = tape.leaf(np.zeros((4, 2)))
    rows = embedding_lookup(table, np.array([1, 1, 3]))
    grads = backward(tape, rows.sum())
    np.testing.assert_array_equal(grads[table], [[0, 0], [2, 2], [0, 0], [1, 1]])


def test_log_softmax_pick_gradient(numeric_grad):
    logits = np.array([[0.2, -0.4, 1.3], [2.0, 0.0, -1.0]])
    idx = np.array([2, 0])

    def build(x):
        return log_softmax_pick(x, idx).sum()

    _, analytic = _grad_of(build, logits)
    np.testing.assert_allclose(analytic, numeric_grad(_value_of(build), logits), rtol=1e-6, atol=1e-9)


def test_stop_gradient_blocks(tape):
    x = tape.leaf(2.0)
    y = stop_gradient(x * x) * x
    grads = backward(tape, y)
    assert grads[x] == pytest.approx(4.0)


def test_unused_leaf_gets_zero_gradient(tape):
    x = tape.leaf([1.0, 2.0])
    unused = tape.leaf(np.ones((2, 2)))
    grads = backward(tape, x.sum())
    np.testing.assert_array_equal(grads[unused], np.zeros((2, 2)))


def test_constants_receive_no_gradient(tape):
    x = tape.leaf(1.5)
    c = tape.constant(4.0)
    grads = backward(tape, x * c)
    assert c not in grads
    assert grads[x] == pytest.approx(4.0)


def test_named_leaf_is_reused(tape):
    a = tape.named_leaf(("param", "w"), np.ones(2))
    b = tape.named_leaf(("param", "w"), np.zeros(2))
    assert a is b
    np.testing.assert_array_equal(b.value, np.ones(2))


# ============== Errors ==============

def test_log_of_non_positive_is_domain_error(tape):
    with pytest.raises(DomainError):
        tape.leaf([1.0, 0.0]).log()


def test_division_by_zero_is_domain_error(tape):
    with pytest.raises(DomainError):
        tape.leaf(1.0) / tape.leaf(0.0)


def test_exp_overflow_is_domain_error(tape):
    with pytest.raises(DomainError):
        tape.leaf(1000.0).exp()


def test_unknown_op(tape):
    with pytest.raises(UnknownOpError):
        forward_op("conv2d", [tape.leaf(1.0)])


def test_matmul_shape_mismatch(tape):
    with pytest.raises(ShapeError):
        tape.leaf(np.ones((2, 3))) @ tape.leaf(np.ones((2, 3)))


def test_add_shape_mismatch(tape):
    with pytest.raises(ShapeError):
        tape.leaf(np.ones(3)) + tape.leaf(np.ones(4))


def test_pick_out_of_range(tape):
    with pytest.raises(CategoryIndexError):
        pick(tape.leaf(np.zeros(3)), np.array([3]))


def test_backward_needs_scalar_root(tape):
    x = tape.leaf([1.0, 2.0])
    with pytest.raises(NonScalarRootError):
        backward(tape, x * 2.0)


def test_registry_names_every_op_used_by_nodes():
    for name in ("add", "sub", "mul", "div", "matmul", "tanh", "exp", "log", "sum", "mean",
                 "max", "logsumexp", "softmax_log", "embedding_lookup", "concat", "broadcast"):
        assert name in OP_REGISTRY


def test_logsumexp_matches_scipy_on_random_rows(tape):
    values = np.random.default_rng(1).normal(scale=30.0, size=(5, 9))
    out = logsumexp(tape.leaf(values), axis=-1)
    np.testing.assert_allclose(out.value, sp_logsumexp(values, axis=-1), rtol=1e-14, atol=1e-12)
