"""Finite-difference oracles for the hand-derived layer gradients."""

import numpy as np
import pytest

from spectralmesh.nn.layers import (
    ChebConv,
    Dense,
    cheb_conv_backward,
    cheb_conv_forward,
    cheb_conv_forward_cached,
    dense_backward,
    dense_forward,
    leaky_relu,
    leaky_relu_backward,
)
from spectralmesh.primitives import icosphere
from spectralmesh.spectral import build_laplacian

from conftest import central_diff, rel_err


@pytest.fixture(scope="module")
def lap():
    return build_laplacian(icosphere(0).topology)


def _random_conv(rng, order=3, fan_in=2, fan_out=4):
    return ChebConv(
        weight=0.3 * rng.standard_normal((order, fan_in, fan_out)),
        bias=0.1 * rng.standard_normal(fan_out),
    )


def test_cheb_conv_weight_gradient_matches_fd(lap):
    rng = np.random.default_rng(7)
    layer = _random_conv(rng)
    x = rng.standard_normal((12, 2))
    upstream = rng.standard_normal((12, 4))

    _, gw, _ = cheb_conv_backward(layer, lap, x, upstream)

    def loss(w):
        probe = ChebConv(weight=w, bias=layer.bias)
        return float((cheb_conv_forward(probe, lap, x) * upstream).sum())

    fd = central_diff(loss, layer.weight)
    assert rel_err(gw, fd) < 1e-4


def test_cheb_conv_input_gradient_matches_fd(lap):
    rng = np.random.default_rng(8)
    layer = _random_conv(rng)
    x = rng.standard_normal((12, 2))
    upstream = rng.standard_normal((12, 4))

    gx, _, _ = cheb_conv_backward(layer, lap, x, upstream)
    fd = central_diff(
        lambda v: float((cheb_conv_forward(layer, lap, v) * upstream).sum()), x
    )
    assert rel_err(gx, fd) < 1e-4


def test_cheb_conv_bias_gradient_is_upstream_column_sum(lap):
    rng = np.random.default_rng(9)
    layer = _random_conv(rng)
    x = rng.standard_normal((3, 12, 2))
    upstream = rng.standard_normal((3, 12, 4))
    _, _, gb = cheb_conv_backward(layer, lap, x, upstream)
    np.testing.assert_allclose(gb, upstream.sum(axis=(0, 1)), rtol=0, atol=1e-12)


def test_dense_gradients_match_fd():
    rng = np.random.default_rng(10)
    layer = Dense(
        weight=0.5 * rng.standard_normal((5, 3)), bias=rng.standard_normal(3)
    )
    x = rng.standard_normal((7, 5))
    upstream = rng.standard_normal((7, 3))
    gx, gw, gb = dense_backward(layer, x, upstream)

    fd_w = central_diff(
        lambda w: float((dense_forward(Dense(w, layer.bias), x) * upstream).sum()),
        layer.weight,
    )
    fd_b = central_diff(
        lambda b: float((dense_forward(Dense(layer.weight, b), x) * upstream).sum()),
        layer.bias,
    )
    fd_x = central_diff(lambda v: float((dense_forward(layer, v) * upstream).sum()), x)
    assert rel_err(gw, fd_w) < 1e-4
    assert rel_err(gb, fd_b) < 1e-4
    assert rel_err(gx, fd_x) < 1e-4


def test_zero_upstream_gives_exactly_zero_gradients(lap):
    rng = np.random.default_rng(11)
    layer = _random_conv(rng)
    x = rng.standard_normal((12, 2))
    gx, gw, gb = cheb_conv_backward(layer, lap, x, np.zeros((12, 4)))
    assert not gx.any() and not gw.any() and not gb.any()

    dense = Dense(weight=rng.standard_normal((4, 2)), bias=np.zeros(2))
    gx, gw, gb = dense_backward(dense, rng.standard_normal((5, 4)), np.zeros((5, 2)))
    assert not gx.any() and not gw.any() and not gb.any()


def test_batched_conv_matches_per_sample_loop(lap):
    rng = np.random.default_rng(12)
    layer = _random_conv(rng)
    batch = rng.standard_normal((4, 12, 2))
    together = cheb_conv_forward(layer, lap, batch)
    for i in range(4):
        alone = cheb_conv_forward(layer, lap, batch[i])
        np.testing.assert_allclose(together[i], alone, rtol=0, atol=1e-13)


def test_cached_basis_backward_matches_recompute(lap):
    rng = np.random.default_rng(13)
    layer = _random_conv(rng)
    x = rng.standard_normal((2, 12, 2))
    upstream = rng.standard_normal((2, 12, 4))
    _, basis = cheb_conv_forward_cached(layer, lap, x)
    cached = cheb_conv_backward(layer, lap, x, upstream, basis=basis)
    fresh = cheb_conv_backward(layer, lap, x, upstream)
    for a, b in zip(cached, fresh):
        np.testing.assert_array_equal(a, b)


def test_fan_in_mismatch_rejected(lap):
    rng = np.random.default_rng(14)
    layer = _random_conv(rng, fan_in=2)
    with pytest.raises(ValueError):
        cheb_conv_forward(layer, lap, rng.standard_normal((12, 3)))


def test_leaky_relu_values_and_subgradient():
    x = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    y = leaky_relu(x, 0.2)
    np.testing.assert_array_equal(y, [-0.4, -0.1, 0.0, 0.5, 2.0])

    upstream = np.ones_like(x)
    g = leaky_relu_backward(x, upstream, 0.2)
    # the kink at 0 takes the negative-side slope
    np.testing.assert_array_equal(g, [0.2, 0.2, 0.2, 1.0, 1.0])

    rng = np.random.default_rng(15)
    v = rng.standard_normal(20) + 0.1  # keep clear of the kink
    u = rng.standard_normal(20)
    fd = central_diff(lambda t: float((leaky_relu(t, 0.2) * u).sum()), v)
    assert rel_err(leaky_relu_backward(v, u, 0.2), fd) < 1e-6
