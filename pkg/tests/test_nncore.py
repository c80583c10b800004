from __future__ import annotations

import numpy as np
import pytest

from src.errors import DimensionMismatch
from src.models.nncore import (
    MlpParams,
    adam_state,
    adam_step,
    class_weights,
    cosine_loss,
    gradient_check,
    init_mlp,
    load_params,
    mlp_backward,
    mlp_forward,
    weighted_bce,
)


def _mlp_loss(params: MlpParams, x: np.ndarray, target: np.ndarray):
    out, cache = mlp_forward(params, x)
    diff = out - target
    return 0.5 * float(np.sum(diff * diff)), cache, diff


def test_identity_layer_passes_input_through():
    params = MlpParams([np.eye(3)], [np.zeros(3)], ("identity",))
    x = np.array([[1.0, -2.0, 0.5]])
    out, _ = mlp_forward(params, x)
    assert np.array_equal(out, x)


def test_zero_weights_give_activation_of_bias():
    bias = np.array([0.3, -1.2])
    params = MlpParams([np.zeros((4, 2))], [bias], ("tanh",))
    out, _ = mlp_forward(params, np.ones((5, 4)))
    assert np.allclose(out, np.tanh(bias))


def test_same_seed_same_network():
    x = np.random.default_rng(1).standard_normal((3, 5))
    a, _ = mlp_forward(init_mlp([5, 4, 2], np.random.default_rng(9)), x)
    b, _ = mlp_forward(init_mlp([5, 4, 2], np.random.default_rng(9)), x)
    assert np.array_equal(a, b)


def test_scalar_linear_gradient():
    params = MlpParams([np.array([[2.0]])], [np.zeros(1)], ("identity",))
    x = np.array([[3.0]])
    _, cache = mlp_forward(params, x)
    grads, grad_in = mlp_backward(params, cache, np.array([[0.5]]))
    assert grads.weights[0][0, 0] == pytest.approx(3.0 * 0.5)
    assert grad_in[0, 0] == pytest.approx(2.0 * 0.5)


def test_zero_upstream_gradient():
    params = init_mlp([4, 3, 2], np.random.default_rng(0))
    _, cache = mlp_forward(params, np.ones((2, 4)))
    grads, grad_in = mlp_backward(params, cache, np.zeros((2, 2)))
    assert all(not g.any() for g in grads.weights + grads.biases)
    assert not grad_in.any()


def test_three_layer_net_matches_finite_differences():
    rng = np.random.default_rng(4)
    params = init_mlp([5, 6, 4, 3], rng)
    x = rng.standard_normal((7, 5))
    target = rng.standard_normal((7, 3))
    _, cache, diff = _mlp_loss(params, x, target)
    grads, _ = mlp_backward(params, cache, diff)

    errors = gradient_check(
        lambda: _mlp_loss(params, x, target)[0], params.named(), grads.named()
    )
    assert max(errors.values()) < 1e-6


@pytest.mark.parametrize(
    "z, w, expected",
    [
        (0.0, 1.0, np.log(2.0)),
        (0.0, 2.0, 2.0 * np.log(2.0)),
        (50.0, 1.0, 0.0),
    ],
)
def test_weighted_bce_values(z, w, expected):
    loss, _ = weighted_bce(np.array([z]), np.array([1.0]), np.array([w]))
    assert loss == pytest.approx(expected, abs=1e-12)


def test_equal_weights_reduce_to_plain_bce():
    rng = np.random.default_rng(2)
    z = rng.standard_normal((6, 10))
    y = (rng.random((6, 10)) > 0.5).astype(float)
    loss, _ = weighted_bce(z, y, np.ones(10))
    p = 1.0 / (1.0 + np.exp(-z))
    plain = -np.sum(y * np.log(p) + (1 - y) * np.log(1 - p)) / 6
    assert abs(loss - plain) < 1e-12


def test_bce_gradient_and_shape_checks():
    rng = np.random.default_rng(3)
    z = rng.standard_normal((4, 3))
    y = (rng.random((4, 3)) > 0.5).astype(float)
    w = np.array([0.5, 1.0, 2.0])
    _, grad = weighted_bce(z, y, w)
    errors = gradient_check(lambda: weighted_bce(z, y, w)[0], {"z": z}, {"z": grad})
    assert errors["z"] < 1e-6
    with pytest.raises(DimensionMismatch):
        weighted_bce(z, y, np.ones(4))


def test_class_weights():
    y = np.zeros((100, 3))
    y[:25, 0] = 1  # n=25 of N=100
    y[:, 1] = 1  # every edge
    w = class_weights(y)
    assert w[0] == pytest.approx(np.sqrt(3.0))
    assert w[1] == pytest.approx(1e-3)
    assert w[2] == 0.0


@pytest.mark.parametrize(
    "r, t, expected",
    [
        ([1.0, 2.0], [1.0, 2.0], 0.0),
        ([1.0, 0.0], [0.0, 3.0], 1.0),
        ([1.0, -1.0], [-2.0, 2.0], 2.0),
    ],
)
def test_cosine_loss_values(r, t, expected):
    loss, _ = cosine_loss(np.array(r), np.array(t))
    assert loss == pytest.approx(expected, abs=1e-9)


def test_cosine_loss_gradient_restricted_to_rows():
    rng = np.random.default_rng(5)
    r = rng.standard_normal((6, 4))
    t = rng.standard_normal((6, 4))
    rows = np.array([0, 2, 5])
    _, grad = cosine_loss(r, t, rows)
    assert not grad[[1, 3, 4]].any()
    errors = gradient_check(lambda: cosine_loss(r, t, rows)[0], {"r": r}, {"r": grad})
    assert errors["r"] < 1e-6


def test_adam_zero_gradient_keeps_params():
    params = {"w": np.array([1.0, -2.0])}
    state = adam_state(params)
    adam_step(params, {"w": np.zeros(2)}, state, lr=0.1)
    assert np.array_equal(params["w"], [1.0, -2.0])


def test_adam_positive_gradient_decreases_param():
    params = {"w": np.array([0.0])}
    state = adam_state(params)
    seen = [0.0]
    for _ in range(5):
        adam_step(params, {"w": np.array([1.0])}, state, lr=0.01)
        seen.append(float(params["w"][0]))
    assert all(b < a for a, b in zip(seen, seen[1:]))


def test_adam_minimizes_quadratic():
    target = np.array([3.0, -1.0, 0.5])
    params = {"x": np.zeros(3)}
    state = adam_state(params)

    def loss() -> float:
        return float(np.sum((params["x"] - target) ** 2))

    start = loss()
    for _ in range(100):
        adam_step(params, {"x": 2.0 * (params["x"] - target)}, state, lr=0.05)
    assert loss() < start


def test_params_checkpoint(tmp_path):
    params = init_mlp([3, 2], np.random.default_rng(0)).named("dec.")
    from src.models.nncore import save_params

    save_params(tmp_path / "p.npz", params, {"hidden": 2})
    loaded, meta = load_params(tmp_path / "p.npz")
    assert meta == {"hidden": 2}
    assert list(loaded) == list(params)
    assert all(np.array_equal(loaded[k], params[k]) for k in params)
