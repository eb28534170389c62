import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windcast.errors import DimensionError, NumericError
from windcast.nn import (LstmCellParams, LstmNetwork, LstmState, Optimizer, clip_global_norm,
                         dropout_mask, lstm_backward, lstm_forward, lstm_step, mse_loss)

# scalar cell with every weight 0.5, bias 0, x=1, zero state (evaluated by hand)
SIG_HALF = 0.6224593312018546
TANH_HALF = 0.46211715726000974
C_SCALAR = 0.28764913664496794
H_SCALAR = 0.17426971865610508


def test_zero_cell():
    p = LstmCellParams.zeros(3, 4)
    state, cache = lstm_step(p, np.array([1.0, -2.0, 3.0]))
    for g in (cache.f, cache.i, cache.o):
        np.testing.assert_array_equal(g, 0.5)
    np.testing.assert_array_equal(cache.g, 0.0)
    np.testing.assert_array_equal(state.c, 0.0)
    np.testing.assert_array_equal(state.h, 0.0)


def test_forget_bias_saturates():
    p = LstmCellParams.zeros(2, 3)
    p.gate("f")[2][:] = 50.0
    _, cache = lstm_step(p, np.ones(2))
    assert np.all(np.abs(cache.f - 1.0) < 1e-9)


def test_scalar_oracle():
    p = LstmCellParams(np.full((4, 1), 0.5), np.full((4, 1), 0.5), np.zeros(4))
    state, cache = lstm_step(p, np.array([1.0]), LstmState.zeros(1))
    assert cache.f[0] == pytest.approx(SIG_HALF, abs=1e-15)
    assert cache.i[0] == pytest.approx(SIG_HALF, abs=1e-15)
    assert cache.o[0] == pytest.approx(SIG_HALF, abs=1e-15)
    assert cache.g[0] == pytest.approx(TANH_HALF, abs=1e-15)
    assert state.c[0] == pytest.approx(C_SCALAR, abs=1e-15)
    assert state.h[0] == pytest.approx(H_SCALAR, abs=1e-15)
    assert state.h[0] == pytest.approx(SIG_HALF * np.tanh(SIG_HALF * TANH_HALF), abs=1e-15)


def test_step_shape_errors():
    p = LstmCellParams.zeros(2, 3)
    with pytest.raises(DimensionError):
        lstm_step(p, np.ones(3))
    with pytest.raises(DimensionError):
        lstm_step(p, np.ones(2), LstmState.zeros(4))
    with pytest.raises(DimensionError):
        LstmCellParams(np.zeros((12, 3)), np.zeros((8, 2)), np.zeros(12)).check()


def test_non_finite_state_raises():
    p = LstmCellParams.zeros(1, 1)
    with np.errstate(invalid="ignore"), pytest.raises(NumericError, match=r"\|W\|"):
        lstm_step(p, np.array([np.inf]))


@given(st.integers(0, 2**31 - 1))
def test_gate_ranges(seed):
    rng = np.random.default_rng(seed)
    p = LstmCellParams(rng.normal(0, 3, (8, 2)), rng.normal(0, 3, (8, 3)), rng.normal(0, 3, 8))
    state = LstmState.zeros(2, 4)
    for _ in range(5):
        state, k = lstm_step(p, rng.normal(0, 3, (4, 3)), state)
        assert np.all((k.f >= 0) & (k.f <= 1) & (k.i >= 0) & (k.i <= 1) & (k.o >= 0) & (k.o <= 1))
        assert np.all(np.abs(k.g) <= 1) and np.all(np.abs(state.h) <= 1)


def _loss(p, xs, v):
    hs, _ = lstm_forward(p, xs)
    return float(np.sum(hs[:, -1, :] * v))


def _fd_check(p, xs, v, h=1e-5):
    hs, caches = lstm_forward(p, xs)
    grads, _ = lstm_backward(p, caches, dh_last=np.broadcast_to(v, hs[:, -1, :].shape))
    worst_rel, worst_abs = 0.0, 0.0
    for name in ("W", "U", "b"):
        arr, g = getattr(p, name), getattr(grads, name)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = _loss(p, xs, v)
            arr[idx] = old - h
            down = _loss(p, xs, v)
            arr[idx] = old
            num = (up - down) / (2 * h)
            diff = abs(num - g[idx])
            worst_abs = max(worst_abs, diff)
            scale = max(abs(num), abs(g[idx]))
            if scale > 1e-7:
                worst_rel = max(worst_rel, diff / scale)
    return worst_rel, worst_abs


def _random_cell(rng, I, H):
    return LstmCellParams(rng.normal(0, 0.5, (4 * H, H)), rng.normal(0, 0.5, (4 * H, I)),
                          rng.normal(0, 0.5, 4 * H))


def test_finite_difference_small_net():
    rng = np.random.default_rng(0)
    p = _random_cell(rng, 2, 3)
    rel, _ = _fd_check(p, rng.normal(size=(2, 4, 2)), rng.normal(size=3))
    assert rel < 1e-4


def test_finite_difference_single_step():
    rng = np.random.default_rng(1)
    p = _random_cell(rng, 2, 3)
    _, abs_err = _fd_check(p, rng.normal(size=(1, 1, 2)), rng.normal(size=3))
    assert abs_err < 1e-6


@settings(max_examples=50)
@given(st.integers(0, 2**31 - 1), st.integers(1, 4), st.integers(1, 3), st.integers(1, 5))
def test_gradients_match_finite_differences(seed, H, I, T):
    rng = np.random.default_rng(seed)
    p = _random_cell(rng, I, H)
    rel, _ = _fd_check(p, rng.normal(size=(2, T, I)), rng.normal(size=H))
    assert rel < 1e-4


def test_zero_upstream_gradient():
    rng = np.random.default_rng(2)
    p = _random_cell(rng, 2, 3)
    _, caches = lstm_forward(p, rng.normal(size=(2, 4, 2)))
    grads, dxs = lstm_backward(p, caches, dh_last=np.zeros((2, 3)))
    for g in (grads.W, grads.U, grads.b, dxs):
        assert not np.any(g)


def test_backward_needs_caches():
    p = LstmCellParams.zeros(1, 1)
    with pytest.raises(ValueError):
        lstm_backward(p, [])
    with pytest.raises(ValueError):
        lstm_backward(p, [None])


def test_network_gradients_two_layers():
    rng = np.random.default_rng(3)
    net = LstmNetwork.init(3, [4, 2], rng)
    X, y = rng.normal(size=(5, 3, 3)), rng.normal(size=5)
    pred, cache = net.forward(X)
    grads = net.backward(cache, mse_loss(pred, y)[1])
    h = 1e-6
    for name, arr in net.params.items():
        for idx in list(np.ndindex(arr.shape))[:6]:
            old = arr[idx]
            arr[idx] = old + h
            up = mse_loss(net.forward(X)[0], y)[0]
            arr[idx] = old - h
            down = mse_loss(net.forward(X)[0], y)[0]
            arr[idx] = old
            assert grads[name][idx] == pytest.approx((up - down) / (2 * h), rel=1e-4, abs=1e-8)


def test_adam_first_step():
    p = {"w": np.zeros(1)}
    Optimizer("adam", 0.1).step(p, {"w": np.ones(1)})
    assert p["w"][0] == pytest.approx(-0.1, abs=1e-8)


def test_sgdm_two_steps():
    p = {"w": np.zeros(1)}
    opt = Optimizer("sgdm", 0.1)
    for _ in range(2):
        opt.step(p, {"w": np.ones(1)})
    assert p["w"][0] == pytest.approx(-0.29, abs=1e-15)
    assert opt.t == 2


@pytest.mark.parametrize("kind", ["sgdm", "adam", "rmsprop"])
def test_zero_lr_leaves_params(kind):
    p = {"w": np.array([0.3, -1.2])}
    Optimizer(kind, 0.0).step(p, {"w": np.array([1.0, 2.0])})
    np.testing.assert_array_equal(p["w"], [0.3, -1.2])


def test_non_finite_gradient_refused():
    p = {"w": np.zeros(2)}
    opt = Optimizer("adam", 0.1)
    with pytest.raises(NumericError):
        opt.step(p, {"w": np.array([np.nan, 1.0])})
    assert opt.t == 0 and not np.any(p["w"])
    with pytest.raises(DimensionError):
        opt.step(p, {"w": np.zeros(3)})
    with pytest.raises(ValueError):
        Optimizer("sgd")


@given(st.integers(0, 2**31 - 1), st.floats(1e-5, 1e-1))
def test_adam_step_bound(seed, lr):
    rng = np.random.default_rng(seed)
    p = {"w": rng.normal(size=6)}
    opt = Optimizer("adam", lr)
    for _ in range(5):
        before = p["w"].copy()
        opt.step(p, {"w": rng.normal(0, 10, 6)})
        assert np.all(np.abs(p["w"] - before) <= 10 * lr)


def test_clip_global_norm():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    clipped, total = clip_global_norm(g, 1.0)
    assert total == 5.0
    assert np.sqrt(clipped["a"][0] ** 2 + clipped["b"][0] ** 2) == pytest.approx(1.0)
    same, _ = clip_global_norm({"a": np.array([0.5])}, 1.0)
    assert same["a"][0] == 0.5


def test_dropout_masks():
    np.testing.assert_array_equal(dropout_mask((3, 4), 0.0, 1), np.ones((3, 4)))
    m = dropout_mask(100_000, 0.5, 7)
    assert 0.98 <= m.mean() <= 1.02
    assert set(np.unique(m).tolist()) == {0.0, 2.0}
    np.testing.assert_array_equal(m, dropout_mask(100_000, 0.5, 7))
    with pytest.raises(ValueError):
        dropout_mask(3, 1.0, 0)


def test_dropout_only_in_training():
    rng = np.random.default_rng(4)
    net = LstmNetwork.init(2, [5], rng, dropout_rate=0.5)
    X = rng.normal(size=(3, 4, 2))
    a, b = net.forward(X)[0], net.forward(X)[0]
    np.testing.assert_array_equal(a, b)
    t1 = net.forward(X, training=True, rng=np.random.default_rng(0))[0]
    t2 = net.forward(X, training=True, rng=np.random.default_rng(1))[0]
    assert not np.array_equal(t1, t2)


def test_xavier_init_forget_bias():
    p = LstmCellParams.xavier(3, 5, np.random.default_rng(0))
    np.testing.assert_array_equal(p.gate("f")[2], 1.0)
    np.testing.assert_array_equal(p.b[5:], 0.0)
    assert np.abs(p.U).max() <= np.sqrt(6 / 8)
