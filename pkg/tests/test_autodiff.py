import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgsag import autodiff as ad
from mgsag.autodiff import AdamState, GraphError, ParamStore, ShapeError, Tensor


def numeric_grad(fn, x, eps=1e-5):
    """Central differences of a scalar numpy function."""
    g = np.zeros_like(x)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        fp = fn(x)
        flat[k] = orig - eps
        fm = fn(x)
        flat[k] = orig
        gf[k] = (fp - fm) / (2 * eps)
    return g


def rel_err(a, n):
    return np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8))


# -- forward values -------------------------------------------------------


def test_softmax_uniform():
    np.testing.assert_allclose(ad.softmax(Tensor([1.0, 1.0, 1.0])).data, [1 / 3] * 3, atol=1e-15)


def test_sigmoid_zero():
    assert ad.sigmoid(Tensor([0.0])).data[0] == 0.5


def test_concat_and_identity_matmul():
    np.testing.assert_array_equal(ad.concat([Tensor([1.0, 2.0]), Tensor([3.0])]).data, [1, 2, 3])
    X = np.arange(6.0).reshape(3, 2)
    np.testing.assert_array_equal(ad.matmul(Tensor(np.eye(3)), Tensor(X)).data, X)


def test_sigmoid_is_stable_for_large_inputs():
    out = ad.sigmoid(Tensor([-800.0, 800.0])).data
    assert np.all(np.isfinite(out))
    assert out[0] == 0.0 and out[1] == 1.0


def test_shape_error_names_op_and_shapes():
    with pytest.raises(ShapeError) as info:
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    assert info.value.op == "matmul"
    assert info.value.shapes == ((2, 3), (2, 3))
    with pytest.raises(ShapeError, match="add"):
        ad.add(Tensor(np.ones(3)), Tensor(np.ones(4)))


def test_softmax_axis_out_of_range():
    with pytest.raises(ShapeError):
        ad.softmax(Tensor(np.ones((2, 2))), axis=2)


def test_leaky_relu_slope():
    np.testing.assert_allclose(ad.leaky_relu(Tensor([-1.0, 2.0]), 0.2).data, [-0.2, 2.0])
    np.testing.assert_allclose(ad.leaky_relu(Tensor([-1.0]), 0.01).data, [-0.01])


# -- backward examples ----------------------------------------------------


def test_backward_quadratic():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    ad.backward(ad.tsum(ad.mul(x, x)))
    np.testing.assert_allclose(x.grad, [2.0, 4.0, 6.0])


def test_unreachable_leaf_gets_zero_grad():
    x = Tensor([1.0, 2.0], requires_grad=True)
    p = Tensor([5.0], requires_grad=True)
    ad.backward(ad.tsum(x), params=[x, p])
    np.testing.assert_array_equal(p.grad, [0.0])


def test_sigmoid_of_dot_at_zero_weight():
    x = np.array([0.5, -2.0, 3.0])
    w = Tensor(np.zeros(3), requires_grad=True)
    ad.backward(ad.sigmoid(ad.matmul(w, Tensor(x))))
    np.testing.assert_allclose(w.grad, 0.25 * x)


def test_backward_twice_raises():
    x = Tensor([1.0], requires_grad=True)
    loss = ad.tsum(ad.mul(x, x))
    ad.backward(loss)
    with pytest.raises(GraphError):
        ad.backward(loss)


def test_backward_needs_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(GraphError):
        ad.backward(ad.mul(x, 2.0))


def test_no_grad_records_nothing():
    x = Tensor([1.0], requires_grad=True)
    with ad.no_grad():
        y = ad.mul(x, 3.0)
    assert not y.requires_grad and y._parents == ()


def test_shared_subexpression_accumulates():
    x = Tensor([3.0], requires_grad=True)
    y = ad.mul(x, x)
    ad.backward(ad.tsum(ad.add(y, y)))  # 2x^2 -> 4x
    np.testing.assert_allclose(x.grad, [12.0])


# -- every op against central differences -----------------------------------

R = np.random.default_rng(0)

UNARY = {
    "tanh": ad.tanh,
    "sigmoid": ad.sigmoid,
    "relu": ad.relu,
    "leaky_relu": lambda t: ad.leaky_relu(t, 0.2),
    "exp": ad.exp,
    "softmax0": lambda t: ad.softmax(t, axis=0),
    "softmax1": lambda t: ad.softmax(t, axis=1),
    "transpose": ad.transpose,
    "reshape": lambda t: ad.reshape(t, (-1,)),
    "sum0": lambda t: ad.tsum(t, axis=0),
    "mean": lambda t: ad.mean(t),
    "getitem": lambda t: t[1:, ::2],
    "fancy": lambda t: t[np.array([0, 2, 2])],
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_op_gradients(name):
    op = UNARY[name]
    x0 = R.normal(size=(3, 4))
    weights = R.normal(size=op(Tensor(x0)).shape)

    def f_np(x):
        return float(np.sum(op(Tensor(x)).data * weights))

    x = Tensor(x0.copy(), requires_grad=True)
    ad.backward(ad.tsum(ad.mul(op(x), weights)))
    assert rel_err(x.grad, numeric_grad(f_np, x0.copy())) < 1e-4


def test_log_gradient_positive_inputs():
    x0 = R.uniform(0.1, 2.0, size=(5,))
    x = Tensor(x0.copy(), requires_grad=True)
    ad.backward(ad.tsum(ad.log(x)))
    np.testing.assert_allclose(x.grad, 1 / x0, rtol=1e-12)


BINARY = {
    "add": ((3, 4), (4,), ad.add),
    "sub": ((3, 1), (3, 4), ad.sub),
    "mul": ((3, 4), (3, 4), ad.mul),
    "matmul22": ((3, 4), (4, 2), ad.matmul),
    "matmul21": ((3, 4), (4,), ad.matmul),
    "matmul12": ((4,), (4, 2), ad.matmul),
    "matmul11": ((4,), (4,), ad.matmul),
    "concat": ((2, 3), (4, 3), lambda a, b: ad.concat([a, b], axis=0)),
    "stack": ((2, 3), (2, 3), lambda a, b: ad.stack([a, b], axis=1)),
}


@pytest.mark.parametrize("name", sorted(BINARY))
def test_binary_op_gradients(name):
    sa, sb, op = BINARY[name]
    a0, b0 = R.normal(size=sa), R.normal(size=sb)
    weights = R.normal(size=op(Tensor(a0), Tensor(b0)).shape)
    a = Tensor(a0.copy(), requires_grad=True)
    b = Tensor(b0.copy(), requires_grad=True)
    ad.backward(ad.tsum(ad.mul(op(a, b), weights)))
    ga = numeric_grad(lambda x: float(np.sum(op(Tensor(x), Tensor(b0)).data * weights)), a0.copy())
    gb = numeric_grad(lambda x: float(np.sum(op(Tensor(a0), Tensor(x)).data * weights)), b0.copy())
    assert rel_err(a.grad, ga) < 1e-4
    assert rel_err(b.grad, gb) < 1e-4


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=1, max_size=12), st.integers(0, 1))
def test_softmax_is_a_simplex(values, transpose):
    x = np.array(values)
    x = np.stack([x, x[::-1]], axis=transpose)
    axis = transpose
    y = ad.softmax(Tensor(x), axis=axis).data
    assert np.all(y >= 0)
    np.testing.assert_allclose(y.sum(axis=axis), 1.0, atol=1e-9)


def test_backward_is_linear(rng):
    w0 = rng.normal(size=(3, 3))
    x = rng.normal(size=(3,))

    def loss1(w):
        return ad.tsum(ad.tanh(ad.matmul(w, x)))

    def loss2(w):
        return ad.tsum(ad.mul(ad.sigmoid(ad.matmul(w, x)), 2.0))

    grads = []
    for build in (loss1, loss2, lambda w: ad.add(loss1(w), loss2(w))):
        w = Tensor(w0, requires_grad=True)
        ad.backward(build(w))
        grads.append(w.grad)
    np.testing.assert_allclose(grads[2], grads[0] + grads[1], rtol=1e-12, atol=1e-15)


# -- dropout --------------------------------------------------------------


def test_dropout_train_statistics():
    gen = np.random.default_rng(3)
    x = Tensor(np.ones(200_000))
    y = ad.dropout(x, 0.3, gen, training=True).data
    zero_frac = np.mean(y == 0)
    assert abs(zero_frac - 0.3) < 0.005
    np.testing.assert_allclose(np.unique(y[y != 0]), [1 / 0.7])


def test_dropout_eval_is_identity():
    x = Tensor(np.arange(5.0))
    assert ad.dropout(x, 0.5, None, training=False) is x


# -- cross entropy --------------------------------------------------------


@pytest.mark.parametrize(
    "probs,label,expected",
    [([0.5, 0.5], 1, math.log(2)), ([1.0, 0.0], 0, 0.0), ([0.25, 0.75], 0, math.log(4))],
)
def test_cross_entropy_values(probs, label, expected):
    assert ad.cross_entropy(Tensor(probs), label).item() == pytest.approx(expected, abs=1e-12)


def test_cross_entropy_floor():
    assert ad.cross_entropy(Tensor([1.0, 0.0]), 1).item() == pytest.approx(-math.log(1e-12))


def test_cross_entropy_label_out_of_range():
    with pytest.raises(ValueError):
        ad.cross_entropy(Tensor([0.5, 0.5]), 2)


def test_cross_entropy_rows_mean():
    probs = Tensor(np.array([[0.5, 0.5], [0.25, 0.75]]))
    assert ad.cross_entropy(probs, np.array([0, 1])).item() == pytest.approx((math.log(2) + math.log(4 / 3)) / 2)


# -- parameters and Adam --------------------------------------------------


def test_param_store_is_lexicographic_and_unique():
    store = ParamStore(0)
    store.bias("b.x", (2,))
    store.matrix("a.W", (3, 2))
    assert store.names() == ["a.W", "b.x"]
    with pytest.raises(KeyError):
        store.bias("a.W", (1,))


def test_glorot_bounds():
    store = ParamStore(5)
    W = store.matrix("W", (30, 20)).data
    assert np.abs(W).max() <= math.sqrt(6 / 50)


def test_adam_zero_gradient_keeps_parameters():
    store = ParamStore(0)
    p = store.add("p", [1.0, -2.0])
    store.zero_grad()
    ad.adam_step(store, AdamState())
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


def test_adam_first_step_closed_form():
    store = ParamStore(0)
    p = store.add("p", [1.0])
    p.grad = np.array([1.0])
    state = AdamState(learning_rate=0.1)
    ad.adam_step(store, state)
    # m_hat = v_hat = 1 after bias correction
    assert p.data[0] == pytest.approx(1.0 - 0.1 / (1.0 + 1e-8), abs=1e-15)
    assert state.t == 1
    np.testing.assert_array_equal(p.grad, [0.0])


def test_adam_matches_reference_over_steps(rng):
    store = ParamStore(0)
    p = store.add("p", rng.normal(size=4))
    ref = p.data.copy()
    m = np.zeros(4)
    v = np.zeros(4)
    state = AdamState(learning_rate=0.01)
    for t in range(1, 8):
        g = rng.normal(size=4)
        p.grad = g.copy()
        ad.adam_step(store, state)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        np.testing.assert_allclose(p.data, ref, rtol=1e-12)


def test_adam_symmetric_parameters():
    store = ParamStore(0)
    a = store.add("a", [0.5])
    b = store.add("b", [0.5])
    a.grad = np.array([0.3])
    b.grad = np.array([0.3])
    ad.adam_step(store, AdamState())
    assert a.data[0] == b.data[0]


def test_adam_missing_grad_names_parameter():
    store = ParamStore(0)
    store.add("encoder.W_g", [1.0])
    with pytest.raises(GraphError, match="encoder.W_g"):
        ad.adam_step(store, AdamState())


# -- finite difference oracle ----------------------------------------------


def test_fd_check_quadratic():
    store = ParamStore(0)
    store.add("p", [3.0])
    err = ad.finite_difference_check(lambda s: ad.tsum(ad.mul(s["p"], s["p"])), store, 1e-5)
    assert err < 1e-8


def test_fd_check_constant_loss():
    store = ParamStore(0)
    store.add("p", [3.0])
    err = ad.finite_difference_check(lambda s: ad.tsum(Tensor([2.0])), store, 1e-5)
    assert err == 0.0


def test_fd_check_rejects_nondeterminism():
    store = ParamStore(0)
    store.add("p", [1.0])
    gen = np.random.default_rng(0)
    with pytest.raises(GraphError):
        ad.finite_difference_check(lambda s: ad.tsum(ad.mul(s["p"], float(gen.random()))), store)


def test_fd_check_restores_parameters():
    store = ParamStore(0)
    p = store.add("p", [0.3, -0.7])
    before = p.data.copy()
    ad.finite_difference_check(lambda s: ad.tsum(ad.tanh(s["p"])), store)
    np.testing.assert_array_equal(p.data, before)
    assert p.data.dtype == np.float64
