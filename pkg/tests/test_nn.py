"""Numerics tests: frozen worked examples plus finite-difference oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from hubguard import nn
from hubguard.errors import ConfigurationError, ContractViolationError, InputError


def rng(seed=0):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# Dense / MLP forward


def test_mlp_forward_zero_weights_zero_output():
    net = nn.Mlp([nn.DenseLayer(np.zeros((3, 4)), np.zeros(3), "relu"),
                  nn.DenseLayer(np.zeros((2, 3)), np.zeros(2), "linear")])
    y, _ = nn.mlp_forward(net, np.ones(4))
    assert_allclose(y, np.zeros(2))


def test_mlp_forward_hand_computed_two_layer():
    # x=[1,1]; relu layer W=[[1,2],[-3,0.5]] b=[0.5,-1] -> z=[3.5,-3.5] -> a=[3.5,0]
    # linear layer W=[[1,-1]] b=[0.25] -> 3.75; all values dyadic so equality is exact
    net = nn.Mlp([
        nn.DenseLayer(np.array([[1.0, 2.0], [-3.0, 0.5]]), np.array([0.5, -1.0]), "relu"),
        nn.DenseLayer(np.array([[1.0, -1.0]]), np.array([0.25]), "linear"),
    ])
    y, _ = nn.mlp_forward(net, np.array([1.0, 1.0]))
    assert y[0] == 3.75


def test_mlp_forward_batch_matches_per_sample():
    net = nn.make_mlp((4, 5, 2), rng(3))
    xs = rng(4).normal(size=(6, 4))
    batch_y, _ = nn.mlp_forward(net, xs)
    for i in range(6):
        yi, _ = nn.mlp_forward(net, xs[i])
        assert_allclose(batch_y[i], yi)


def test_mlp_forward_width_mismatch():
    net = nn.make_mlp((4, 2), rng(0))
    with pytest.raises(InputError):
        nn.mlp_forward(net, np.ones(5))


def test_mlp_forward_is_pure():
    net = nn.make_mlp((4, 3, 2), rng(1))
    x = rng(2).normal(size=4)
    y1, _ = nn.mlp_forward(net, x)
    y2, _ = nn.mlp_forward(net, x)
    assert np.array_equal(y1, y2)


def test_relu_outputs_nonnegative():
    net = nn.make_mlp((3, 8, 8), rng(5), out_activation="relu")
    y, _ = nn.mlp_forward(net, rng(6).normal(size=3) * 10)
    assert (y >= 0).all()


# ---------------------------------------------------------------------------
# MLP backward


def test_mlp_backward_zero_output_grad():
    net = nn.make_mlp((3, 4, 2), rng(7))
    _, cache = nn.mlp_forward(net, np.ones(3))
    grads = nn.mlp_backward(net, cache, np.zeros(2))
    for g in grads:
        assert_allclose(g, np.zeros_like(g))


def test_mlp_backward_linear_outer_product():
    # one linear layer, squared-error upstream grad g: dW = g x^T, db = g
    net = nn.Mlp([nn.DenseLayer(np.array([[0.5, 0.0], [0.0, 0.5]]), np.zeros(2), "linear")])
    x = np.array([1.0, 2.0])
    g = np.array([0.3, -0.7])
    _, cache = nn.mlp_forward(net, x)
    dw, db = nn.mlp_backward(net, cache, g)
    assert_allclose(dw, np.outer(g, x))
    assert_allclose(db, g)


def test_mlp_backward_stale_cache_rejected():
    net = nn.make_mlp((3, 2), rng(8))
    _, cache = nn.mlp_forward(net, np.ones(3))
    adam = nn.AdamState.for_params(net.params(), alpha=0.1)
    nn.adam_step(adam, net.params(), [np.ones_like(p) for p in net.params()])
    net.mark_updated()
    with pytest.raises(ContractViolationError):
        nn.mlp_backward(net, cache, np.ones(2))


def test_mlp_gradcheck_with_huber_head():
    net = nn.make_mlp((5, 6, 3), rng(9))
    x = rng(10).normal(size=5)
    target = np.array([0.3, -0.2, 1.1])

    def loss_fn():
        y, cache = nn.mlp_forward(net, x)
        deltas = target - y
        losses, dl = nn.huber(deltas)
        grads = nn.mlp_backward(net, cache, -dl / 3.0)
        return float(np.mean(losses)), grads

    report = nn.gradient_check(loss_fn, net.params(), tolerance=1e-4)
    assert report.passed, f"max rel err {report.max_rel_error}"


# ---------------------------------------------------------------------------
# Huber


def test_huber_frozen_values():
    assert nn.huber(0.5) == (0.125, 0.5)
    assert nn.huber(-3.0) == (2.5, -1.0)
    assert nn.huber(1.0) == (0.5, 1.0)
    assert nn.huber(0.0) == (0.0, 0.0)


@given(st.floats(-1e6, 1e6))
def test_huber_loss_nonnegative_and_knee_continuous(d):
    loss, grad = nn.huber(d)
    assert loss >= 0.0
    assert abs(grad) <= 1.0
    # the two branches meet at |delta| = 1 with matching value and slope
    assert nn.huber(1.0)[0] == 0.5 and nn.huber(-1.0)[0] == 0.5


@given(st.floats(-100, 100))
def test_huber_grad_is_derivative(d):
    loss_p, _ = nn.huber(d + 1e-6)
    loss_m, _ = nn.huber(d - 1e-6)
    _, grad = nn.huber(d)
    assert abs((loss_p - loss_m) / 2e-6 - grad) < 1e-4


# ---------------------------------------------------------------------------
# Adam


def test_adam_single_step_worked_example():
    # scalar param 0, grad 1, alpha=0.1: bias-corrected m and sqrt(v) are both 1,
    # so the first step is -alpha up to the denominator epsilon
    p = np.array([0.0])
    state = nn.AdamState.for_params([p], alpha=0.1)
    nn.adam_step(state, [p], [np.array([1.0])])
    assert abs(p[0] - (-0.1)) < 1e-7


def test_adam_zero_grads_no_change():
    net = nn.make_mlp((3, 2), rng(11))
    before = [p.copy() for p in net.params()]
    state = nn.AdamState.for_params(net.params(), alpha=0.5)
    nn.adam_step(state, net.params(), [np.zeros_like(p) for p in net.params()])
    for b, a in zip(before, net.params()):
        assert np.array_equal(b, a)


def test_adam_descends_quadratic():
    p = np.array([4.0])
    state = nn.AdamState.for_params([p], alpha=0.05)
    for _ in range(300):
        nn.adam_step(state, [p], [2.0 * p])
    assert abs(p[0]) < 0.5


# ---------------------------------------------------------------------------
# Softmax cross entropy


def test_cross_entropy_uniform_logits():
    loss, grad = nn.softmax_cross_entropy(np.zeros(4), 2)
    assert abs(loss - math.log(4.0)) < 1e-12
    assert_allclose(grad, np.array([0.25, 0.25, -0.75, 0.25]))


def test_cross_entropy_confident_correct():
    loss, _ = nn.softmax_cross_entropy(np.array([10.0, -10.0]), 0)
    assert loss < 1e-8


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=8))
def test_cross_entropy_grad_sums_to_zero(logits):
    loss, grad = nn.softmax_cross_entropy(np.array(logits), 0)
    assert loss >= 0.0
    assert abs(grad.sum()) < 1e-9
    assert abs(nn.softmax(np.array(logits)).sum() - 1.0) < 1e-9


def test_cross_entropy_bad_target():
    with pytest.raises(InputError):
        nn.softmax_cross_entropy(np.zeros(3), 3)


def test_cross_entropy_batch_matches_single():
    z = rng(12).normal(size=(4, 5))
    t = np.array([0, 3, 1, 4])
    mean_loss, grad = nn.softmax_cross_entropy_batch(z, t)
    singles = [nn.softmax_cross_entropy(z[i], t[i]) for i in range(4)]
    assert abs(mean_loss - np.mean([s[0] for s in singles])) < 1e-12
    assert_allclose(grad, np.stack([s[1] for s in singles]) / 4.0)


# ---------------------------------------------------------------------------
# LSTM


def test_lstm_zero_weights_zero_hidden():
    z = np.zeros
    cell = nn.LstmCell(z((3, 2)), z((3, 2)), z((3, 2)), z((3, 2)),
                       z((3, 3)), z((3, 3)), z((3, 3)), z((3, 3)),
                       z(3), z(3), z(3), z(3))
    hs, _ = nn.lstm_forward(cell, np.ones((5, 2)))
    assert_allclose(hs, np.zeros((5, 3)))


def test_lstm_empty_sequence_rejected():
    cell = nn.lstm_init(2, 3, rng(13))
    with pytest.raises(InputError):
        nn.lstm_forward(cell, np.ones((0, 2)))


def test_lstm_gradcheck_len_three():
    cell = nn.lstm_init(3, 4, rng(14))
    xs = rng(15).normal(size=(3, 3))
    w = rng(16).normal(size=(3, 4))  # fixed readout weights

    def loss_fn():
        hs, cache = nn.lstm_forward(cell, xs)
        loss = float(np.sum(hs * w))
        grads, _ = nn.lstm_backward(cell, cache, w)
        return loss, grads

    report = nn.gradient_check(loss_fn, cell.params(), tolerance=1e-4)
    assert report.passed, f"max rel err {report.max_rel_error}"


def test_lstm_length_one_matches_single_step_finite_difference():
    # degenerate BPTT: one timestep must still produce exact cell gradients
    cell = nn.lstm_init(2, 3, rng(17))
    xs = rng(18).normal(size=(1, 2))
    w = rng(19).normal(size=(1, 3))

    def loss_fn():
        hs, cache = nn.lstm_forward(cell, xs)
        grads, _ = nn.lstm_backward(cell, cache, w)
        return float(np.sum(hs * w)), grads

    report = nn.gradient_check(loss_fn, cell.params(), tolerance=1e-4)
    assert report.passed


def test_lstm_input_grads_match_finite_difference():
    cell = nn.lstm_init(2, 3, rng(20))
    xs = rng(21).normal(size=(4, 2))
    w = rng(22).normal(size=(4, 3))
    hs, cache = nn.lstm_forward(cell, xs)
    _, dxs = nn.lstm_backward(cell, cache, w)
    step = 1e-6
    for t in (0, 3):
        for j in range(2):
            xs_p = xs.copy(); xs_p[t, j] += step
            xs_m = xs.copy(); xs_m[t, j] -= step
            lp = float(np.sum(nn.lstm_forward(cell, xs_p)[0] * w))
            lm = float(np.sum(nn.lstm_forward(cell, xs_m)[0] * w))
            assert abs((lp - lm) / (2 * step) - dxs[t, j]) < 1e-4


# ---------------------------------------------------------------------------
# Embedding


def test_embedding_lookup_and_backward():
    emb = nn.Embedding(np.arange(12.0).reshape(4, 3))
    vecs = nn.embed_lookup(emb, [1, 1, 3])
    assert_allclose(vecs[0], [3.0, 4.0, 5.0])
    grad = nn.embed_backward(emb, [1, 1, 3], np.ones((3, 3)))
    assert_allclose(grad[1], [2.0, 2.0, 2.0])  # repeated ids accumulate
    assert_allclose(grad[0], np.zeros(3))
    with pytest.raises(InputError):
        nn.embed_lookup(emb, [4])


# ---------------------------------------------------------------------------
# gradient_check itself


def test_gradient_check_simple_quadratic():
    p = np.array([3.0])

    def f():
        return float(p[0] ** 2), [2.0 * p]

    report = nn.gradient_check(f, [p], tolerance=1e-8)
    assert report.passed
    assert abs(p[0] - 3.0) < 1e-12  # params restored


def test_gradient_check_flags_wrong_gradient():
    p = np.array([3.0])

    def f():
        return float(p[0] ** 2), [3.0 * p]  # deliberately wrong

    report = nn.gradient_check(f, [p], tolerance=1e-4)
    assert not report.passed


# ---------------------------------------------------------------------------
# Snapshots


def test_param_snapshot_round_trip(tmp_path):
    named = {
        "w0": rng(23).normal(size=(3, 4)),
        "b0": rng(24).normal(size=3),
        "scalarish": np.array([math.pi]),
    }
    path = tmp_path / "snap.params"
    nn.save_params(path, named)
    loaded = nn.load_params(path)
    assert set(loaded) == set(named)
    for k in named:
        assert np.array_equal(named[k], loaded[k])  # bit-exact via repr


def test_param_snapshot_rejects_garbage(tmp_path):
    path = tmp_path / "junk.params"
    path.write_text("not a snapshot\n")
    with pytest.raises(InputError):
        nn.load_params(path)


def test_make_mlp_seeded_init_in_bounds_and_deterministic():
    a = nn.make_mlp((128, 64, 32, 4), rng(42))
    b = nn.make_mlp((128, 64, 32, 4), rng(42))
    for pa, pb in zip(a.params(), b.params()):
        assert np.array_equal(pa, pb)
    for layer in a.layers:
        bound = 1.0 / math.sqrt(layer.in_dim)
        assert np.abs(layer.weights).max() <= bound
    assert [l.activation for l in a.layers] == ["relu", "relu", "linear"]
