import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soundchain import tensor as T
from soundchain.errors import GraphConsumed, NotScalar, ShapeError


def _t(a, grad=False):
    return T.Tensor(np.asarray(a, dtype=np.float64), requires_grad=grad)


# ---- conv1d / conv1d_transpose --------------------------------------------

def test_conv1d_definition():
    y = T.conv1d(_t([[[1, 2, 4, 7]]]), _t([[[-1, 1]]]))
    np.testing.assert_array_equal(y.data, [[[1, 2, 3]]])


def test_conv1d_identity_kernel():
    x = np.random.default_rng(0).standard_normal((2, 1, 9))
    np.testing.assert_array_equal(T.conv1d(_t(x), _t([[[1.0]]])).data, x)


def test_conv1d_strided_padded_definition():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 3, 17))
    w = rng.standard_normal((4, 3, 5))
    stride, pad = 3, 2
    y = T.conv1d(_t(x), _t(w), stride, pad).data
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    n = (17 + 2 * pad - 5) // stride + 1
    ref = np.zeros((2, 4, n))
    for t in range(n):
        ref[:, :, t] = np.einsum("bcj,ocj->bo", xp[:, :, t * stride: t * stride + 5], w)
    np.testing.assert_allclose(y, ref, rtol=1e-12, atol=1e-12)


def test_conv1d_channel_mismatch():
    with pytest.raises(ShapeError):
        T.conv1d(_t(np.zeros((1, 2, 8))), _t(np.zeros((1, 3, 2))))


def test_conv1d_kernel_too_long():
    with pytest.raises(ShapeError):
        T.conv1d(_t(np.zeros((1, 1, 3))), _t(np.zeros((1, 1, 8))))


def test_transpose_length():
    y = T.conv1d_transpose(_t(np.ones((1, 1, 16))), _t(np.ones((1, 1, 8))), stride=4, pad=2)
    assert y.shape == (1, 1, 64)


def test_transpose_zero_weight():
    y = T.conv1d_transpose(_t(np.ones((2, 3, 10))), _t(np.zeros((3, 2, 5))), stride=2, pad=1)
    assert not np.any(y.data)


def test_adjoint_small():
    rng = np.random.default_rng(2)
    x, w, y = rng.standard_normal((1, 1, 8)), rng.standard_normal((1, 1, 3)), None
    cx = T.conv1d(_t(x), _t(w)).data
    y = rng.standard_normal(cx.shape)
    lhs = np.vdot(cx, y)
    rhs = np.vdot(x, T.conv1d_transpose(_t(y), _t(w)).data)
    assert abs(lhs - rhs) < 1e-10


@st.composite
def conv_case(draw):
    batch = draw(st.integers(1, 3))
    cin = draw(st.integers(1, 4))
    cout = draw(st.integers(1, 4))
    k = draw(st.integers(1, 7))
    stride = draw(st.integers(1, 4))
    pad = draw(st.integers(0, k - 1))
    length = draw(st.integers(max(1, k - 2 * pad), 30))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return batch, cin, cout, k, stride, pad, length, seed


@settings(max_examples=150, deadline=None)
@given(conv_case())
def test_adjoint_identity(case):
    batch, cin, cout, k, stride, pad, length, seed = case
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch, cin, length))
    w = rng.standard_normal((cout, cin, k))
    cx = T.conv1d(_t(x), _t(w), stride, pad).data
    y = rng.standard_normal(cx.shape)
    # the transpose must land on the conv's input length
    base = T.conv1d_transpose_out_len(cx.shape[2], k, stride, pad)
    op = length - base
    assert 0 <= op < max(stride, 1) or (stride == 1 and op == 0)
    ty = T.conv1d_transpose(_t(y), _t(w), stride, pad, output_padding=op).data
    assert ty.shape == x.shape
    lhs, rhs = np.vdot(cx, y), np.vdot(x, ty)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


@settings(max_examples=60, deadline=None)
@given(conv_case(), st.floats(-3, 3), st.floats(-3, 3))
def test_conv_linearity(case, a, b):
    batch, cin, cout, k, stride, pad, length, seed = case
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, batch, cin, length))
    w = _t(rng.standard_normal((cout, cin, k)))
    lhs = T.conv1d(_t(a * x + b * y), w, stride, pad).data
    rhs = a * T.conv1d(_t(x), w, stride, pad).data + b * T.conv1d(_t(y), w, stride, pad).data
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_generator_shape_algebra():
    length = 16
    for _ in range(5):
        length = T.conv1d_transpose_out_len(length, 25, 4, 11, output_padding=1)
    assert length == 16384
    # and the critic's convolution retraces the path exactly
    for _ in range(5):
        length = T.conv1d_out_len(length, 25, 4, 11)
    assert length == 16


# ---- pointwise ---------------------------------------------------------------

def test_pointwise_definitions():
    assert T.leaky_relu(_t([-1.0]), 0.2).data[0] == pytest.approx(-0.2)
    assert T.tanh(_t([0.0])).data[0] == 0.0
    assert T.relu(_t([-2.0, 3.0])).data.tolist() == [0.0, 3.0]
    x = np.random.default_rng(3).standard_normal((4, 5))
    np.testing.assert_array_equal(T.dense(_t(x), _t(np.eye(5)), _t(np.zeros(5))).data, x)


def test_dense_shape_error():
    with pytest.raises(ShapeError):
        T.dense(_t(np.zeros((2, 3))), _t(np.zeros((4, 5))))


# ---- phase shift ---------------------------------------------------------------

def _reflect_shift_reference(x, k):
    length = x.shape[-1]
    pl, pr = max(k, 0), max(-k, 0)
    xp = np.pad(x, ((0, 0), (pl, pr)), mode="reflect")
    return xp[:, pr: pr + length]


@pytest.mark.parametrize("k", [-3, -1, 0, 1, 2, 3])
def test_phase_shift_matches_reflect_pad(k):
    x = np.random.default_rng(4).standard_normal((1, 2, 11))
    got = T.phase_shift(_t(x), [k]).data[0]
    np.testing.assert_array_equal(got, _reflect_shift_reference(x[0], k))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=1, max_size=4), st.integers(5, 20), st.integers(0, 999))
def test_phase_shift_adjoint(shifts, length, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((len(shifts), 2, length))
    y = rng.standard_normal(x.shape)
    lhs = np.vdot(T.phase_shift(_t(x), shifts).data, y)
    rhs = np.vdot(x, T.phase_shift_adjoint(_t(y), shifts).data)
    assert abs(lhs - rhs) < 1e-10


# ---- backward ------------------------------------------------------------------

def test_linear_gradient():
    x = np.array([1.0, -2.0, 3.0])
    w = _t(np.zeros(3), grad=True)
    T.backward(T.sum(w * _t(x)))
    np.testing.assert_array_equal(w.grad, x)


def test_not_scalar():
    w = _t(np.ones(3), grad=True)
    with pytest.raises(NotScalar):
        T.backward(w * 2.0)


def test_double_backward_rejected():
    w = _t(np.ones(3), grad=True)
    loss = T.sum(T.square(w))
    T.backward(loss)
    with pytest.raises(GraphConsumed):
        T.backward(loss)


def test_reuse_of_consumed_subgraph_rejected():
    w = _t(np.ones(3), grad=True)
    h = T.square(w)
    T.backward(T.sum(h))
    with pytest.raises(GraphConsumed):
        T.backward(T.sum(T.tanh(h)))


def test_two_layer_net_finite_differences():
    rng = np.random.default_rng(5)
    x = _t(rng.standard_normal((6, 4)))
    params = {"w1": _t(rng.standard_normal((4, 8)), True), "b1": _t(rng.standard_normal(8), True),
              "w2": _t(rng.standard_normal((8, 1)), True), "b2": _t(rng.standard_normal(1), True)}

    def loss():
        h = T.leaky_relu(T.dense(x, params["w1"], params["b1"]))
        return T.mean(T.square(T.dense(h, params["w2"], params["b2"])))

    report = T.grad_check(loss, params, tolerance=1e-4, h=1e-4)
    assert report.passed, report


# ---- grad_check examples ------------------------------------------------------

def test_grad_check_linear():
    rng = np.random.default_rng(6)
    x = _t(rng.standard_normal((3, 5)))
    params = {"w": _t(rng.standard_normal((5, 2)), True)}
    report = T.grad_check(lambda: T.sum(T.dense(x, params["w"])), params, tolerance=1e-8)
    assert report.max_rel_error < 1e-8


def test_grad_check_conv_stack():
    rng = np.random.default_rng(7)
    x = _t(rng.standard_normal((2, 2, 32)))
    params = {"w": _t(0.3 * rng.standard_normal((3, 2, 5)), True),
              "b": _t(0.1 * rng.standard_normal(3), True),
              "d": _t(0.3 * rng.standard_normal((3 * 8, 1)), True)}

    def loss():
        h = T.leaky_relu(T.add_bias(T.conv1d(x, params["w"], 4, 2), params["b"]))
        return T.sum(T.square(T.dense(T.reshape(h, (2, 24)), params["d"])))

    assert T.grad_check(loss, params, tolerance=1e-4).max_rel_error < 1e-4


def test_grad_check_tanh_saturated():
    x = _t(np.array([[20.0], [-20.0], [0.3]]))
    params = {"w": _t(np.array([[1.0]]), True)}
    report = T.grad_check(lambda: T.sum(T.tanh(T.dense(x, params["w"]))), params)
    assert report.max_rel_error < 1e-3


# ---- adam ----------------------------------------------------------------------

def test_adam_first_step_closed_form():
    p = {"t": _t(np.zeros(3))}
    st_ = T.AdamState(alpha=1e-4, beta1=0.9, beta2=0.999, epsilon=1e-8)
    T.adam_step(p, {"t": np.full(3, 10.0)}, st_)
    np.testing.assert_allclose(p["t"].data, -1e-4, atol=1e-9)
    assert st_.step == 1


def test_adam_zero_gradient():
    p = {"t": _t(np.arange(4.0))}
    st_ = T.AdamState()
    T.adam_step(p, {"t": np.zeros(4)}, st_)
    np.testing.assert_array_equal(p["t"].data, np.arange(4.0))
    assert st_.step == 1


def test_adam_shape_mismatch():
    with pytest.raises(ShapeError):
        T.adam_step({"t": _t(np.zeros(3))}, {"t": np.zeros(4)}, T.AdamState())


# ---- parameter files -----------------------------------------------------------

def test_array_file_round_trip(tmp_path):
    arrays = {"a": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.ones(4)}
    T.save_arrays(tmp_path / "x.npz", arrays, {"step": 3})
    back, meta = T.load_arrays(tmp_path / "x.npz")
    assert meta == {"step": 3}
    for k in arrays:
        assert back[k].dtype == arrays[k].dtype
        np.testing.assert_array_equal(back[k], arrays[k])
    T.save_arrays(tmp_path / "y.npz", arrays, {"step": 3})
    assert (tmp_path / "x.npz").read_bytes() == (tmp_path / "y.npz").read_bytes()
