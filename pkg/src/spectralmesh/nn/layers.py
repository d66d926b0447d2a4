"""Trainable layers with explicit reverse-mode gradients.

No autodiff anywhere: every forward has a matching hand-derived backward,
validated against central finite differences in the test suite. Layers
accept single signals (n, c) or batches (B, n, c); batched graph
convolution flattens the batch into signal columns so the sparse recurrence
runs once per layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..spectral import GraphLaplacian


@dataclass
class ChebConv:
    """Chebyshev graph convolution: y = sum_j T_j(L~) x W_j + b.

    weight has shape (order, fan_in, fan_out), bias (fan_out,). The layer's
    receptive field is exactly order - 1 hops.
    """

    weight: np.ndarray
    bias: np.ndarray

    @property
    def order(self) -> int:
        return self.weight.shape[0]


@dataclass
class Dense:
    """Affine layer y = x @ weight + bias."""

    weight: np.ndarray
    bias: np.ndarray


def _to_batched(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ValueError(f"expected (n, c) or (B, n, c) signal, got {x.shape}")


def _basis_columns(lap: GraphLaplacian, x: np.ndarray, order: int) -> np.ndarray:
    """Stacked recurrence terms for a batched signal, shape (r, n, B*c)."""
    batch, n, ch = x.shape
    flat = np.ascontiguousarray(x.transpose(1, 0, 2).reshape(n, batch * ch))
    return _kernels.cheb_basis(lap.rescaled, flat, order)


def cheb_conv_forward_cached(layer: ChebConv, lap: GraphLaplacian, x: np.ndarray):
    """Forward pass returning (y, basis) so backward can reuse the basis."""
    xb, squeeze = _to_batched(x)
    batch, n, fan_in = xb.shape
    order, w_in, fan_out = layer.weight.shape
    if w_in != fan_in:
        raise ValueError(f"layer expects {w_in} input channels, got {fan_in}")
    basis = _basis_columns(lap, xb, order)
    # (r, n, B, f) -> (n*B, r*f) rows match weight reshaped (r*f, out)
    stacked = basis.reshape(order, n, batch, fan_in).transpose(1, 2, 0, 3)
    stacked = stacked.reshape(n * batch, order * fan_in)
    y = stacked @ layer.weight.reshape(order * fan_in, fan_out)
    y += layer.bias
    y = y.reshape(n, batch, fan_out).transpose(1, 0, 2)
    if squeeze:
        return y[0], basis
    return y, basis


def cheb_conv_forward(layer: ChebConv, lap: GraphLaplacian, x: np.ndarray) -> np.ndarray:
    """y = sum_j T_j(L~) x W_j + b for (n, c) or (B, n, c) input."""
    y, _ = cheb_conv_forward_cached(layer, lap, x)
    return y


def cheb_conv_backward(
    layer: ChebConv,
    lap: GraphLaplacian,
    x: np.ndarray,
    grad_out: np.ndarray,
    basis: np.ndarray | None = None,
):
    """Gradients of a scalar loss through the convolution.

    Returns (grad_x, grad_weight, grad_bias) with grad_x shaped like x.
    ``basis`` may be passed from :func:`cheb_conv_forward_cached` to avoid
    recomputing the recurrence.
    """
    xb, squeeze = _to_batched(x)
    gb, _ = _to_batched(grad_out)
    batch, n, fan_in = xb.shape
    order, _, fan_out = layer.weight.shape
    if basis is None:
        basis = _basis_columns(lap, xb, order)

    g_cols = np.ascontiguousarray(gb.transpose(1, 0, 2).reshape(n * batch, fan_out))
    stacked = basis.reshape(order, n, batch, fan_in).transpose(1, 2, 0, 3)
    stacked = stacked.reshape(n * batch, order * fan_in)
    grad_weight = (stacked.T @ g_cols).reshape(order, fan_in, fan_out)
    grad_bias = g_cols.sum(axis=0)

    # reverse through the recurrence: per-order upstream is G W_j^T
    w_flat = layer.weight.reshape(order * fan_in, fan_out)
    bars = (g_cols @ w_flat.T).reshape(n, batch, order, fan_in)
    bars = np.ascontiguousarray(bars.transpose(2, 0, 1, 3).reshape(order, n, batch * fan_in))
    grad_cols = _kernels.cheb_reverse(lap.rescaled, bars)
    grad_x = grad_cols.reshape(n, batch, fan_in).transpose(1, 0, 2)
    if squeeze:
        grad_x = grad_x[0]
    return grad_x, grad_weight, grad_bias


def dense_forward(layer: Dense, x: np.ndarray) -> np.ndarray:
    return x @ layer.weight + layer.bias


def dense_backward(layer: Dense, x: np.ndarray, grad_out: np.ndarray):
    """Returns (grad_x, grad_weight, grad_bias) for y = x W + b."""
    grad_x = grad_out @ layer.weight.T
    grad_weight = x.T @ grad_out
    grad_bias = grad_out.sum(axis=0)
    return grad_x, grad_weight, grad_bias


def leaky_relu(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0, x, slope * x)


def leaky_relu_backward(x: np.ndarray, grad_out: np.ndarray, slope: float) -> np.ndarray:
    # subgradient at 0 takes the negative-side slope
    return np.where(x > 0, grad_out, slope * grad_out)
