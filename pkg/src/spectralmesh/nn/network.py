"""Mesh autoencoder assembly: spec, parameters, forward, and gradients.

The encoder stacks Chebyshev convolution + leaky ReLU + survivor-selection
downsampling once per hierarchy level, then a dense map to the latent
vector. The decoder mirrors it with barycentric upsampling; the final
convolution emits 3 channels with no activation. All gradients are
hand-derived reverse mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..coarsen import MeshHierarchy, _apply_transform
from ..spectral import GraphLaplacian, build_laplacian
from .layers import (
    ChebConv,
    Dense,
    cheb_conv_backward,
    cheb_conv_forward_cached,
    dense_backward,
    dense_forward,
    leaky_relu,
    leaky_relu_backward,
)

PARAMS_VERSION = "1"


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture hyperparameters for the mesh autoencoder.

    ``filters[k]`` is the output width of the level-k encoder convolution
    (the decoder mirrors them in reverse), ``factors[k]`` the pooling ratio
    between levels k and k+1.
    """

    num_vertices: int
    factors: tuple[int, ...] = (4, 4, 2, 2)
    filters: tuple[int, ...] = (16, 32, 32, 48)
    latent: int = 64
    order: int = 3
    relu_slope: float = 0.2
    in_channels: int = 3

    def __post_init__(self):
        if len(self.filters) != len(self.factors):
            raise ValueError("filters and factors must have equal length")
        if self.latent < 1 or self.order < 1:
            raise ValueError("latent size and order must be >= 1")

    def to_dict(self) -> dict:
        return {
            "num_vertices": self.num_vertices,
            "factors": list(self.factors),
            "filters": list(self.filters),
            "latent": self.latent,
            "order": self.order,
            "relu_slope": self.relu_slope,
            "in_channels": self.in_channels,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkSpec":
        return cls(
            num_vertices=int(data["num_vertices"]),
            factors=tuple(int(f) for f in data["factors"]),
            filters=tuple(int(f) for f in data["filters"]),
            latent=int(data["latent"]),
            order=int(data["order"]),
            relu_slope=float(data["relu_slope"]),
            in_channels=int(data["in_channels"]),
        )


class NetworkParams:
    """Named tensor map with a format version tag."""

    def __init__(self, tensors: dict[str, np.ndarray], version: str = PARAMS_VERSION):
        self.tensors = tensors
        self.version = version

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            {k: v.copy() for k, v in self.tensors.items()}, self.version
        )

    def total_count(self) -> int:
        return int(sum(v.size for v in self.tensors.values()))

    def names(self) -> list[str]:
        return sorted(self.tensors)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


@dataclass(frozen=True)
class ParamCount:
    decoder: int
    total: int


def _encoder_widths(spec: NetworkSpec) -> list[tuple[int, int]]:
    """(fan_in, fan_out) per encoder convolution, level order."""
    widths = []
    fan_in = spec.in_channels
    for f in spec.filters:
        widths.append((fan_in, f))
        fan_in = f
    return widths


def _decoder_widths(spec: NetworkSpec) -> list[tuple[int, int]]:
    """(fan_in, fan_out) per decoder convolution, stored coarse-to-fine."""
    levels = len(spec.filters)
    widths = []
    for k in range(levels - 1, -1, -1):
        fan_in = spec.filters[k]
        fan_out = spec.filters[k - 1] if k > 0 else spec.in_channels
        widths.append((fan_in, fan_out))
    return widths


def count_params(spec: NetworkSpec, level_sizes: list[int]) -> ParamCount:
    """Closed-form trainable parameter counts (decoder-only and total)."""
    if len(level_sizes) != len(spec.factors) + 1:
        raise ValueError("level_sizes must have len(factors) + 1 entries")
    coarse = level_sizes[-1]
    bottleneck = coarse * spec.filters[-1]

    encoder = 0
    for fan_in, fan_out in _encoder_widths(spec):
        encoder += spec.order * fan_in * fan_out + fan_out
    encoder += bottleneck * spec.latent + spec.latent

    decoder = spec.latent * bottleneck + bottleneck
    for fan_in, fan_out in _decoder_widths(spec):
        decoder += spec.order * fan_in * fan_out + fan_out
    return ParamCount(decoder=decoder, total=encoder + decoder)


class Autoencoder:
    """Static structure (spec + hierarchy + per-level Laplacians) for a
    functional parameter dictionary.

    Parameters live in a :class:`NetworkParams`; every method is pure in
    the parameters so frozen decoders are just read-only tensor maps.
    """

    def __init__(self, spec: NetworkSpec, hierarchy: MeshHierarchy):
        if hierarchy.level_sizes[0] != spec.num_vertices:
            raise ValueError(
                f"spec expects {spec.num_vertices} vertices, hierarchy has "
                f"{hierarchy.level_sizes[0]}"
            )
        if tuple(hierarchy.factors) != tuple(spec.factors):
            raise ValueError(
                f"spec factors {spec.factors} do not match hierarchy "
                f"{tuple(hierarchy.factors)}"
            )
        self.spec = spec
        self.hierarchy = hierarchy
        self.levels = len(spec.filters)
        self.laplacians: list[GraphLaplacian] = [
            build_laplacian(t) for t in hierarchy.levels[: self.levels]
        ]
        self.downs_t = [m.T.tocsr() for m in hierarchy.downs]
        self.ups_t = [m.T.tocsr() for m in hierarchy.ups]
        for mat in self.downs_t + self.ups_t:
            mat.sort_indices()

    # ---- parameters ----

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        spec = self.spec
        coarse = self.hierarchy.level_sizes[-1]
        bottleneck = coarse * spec.filters[-1]
        shapes: dict[str, tuple[int, ...]] = {}
        for k, (fan_in, fan_out) in enumerate(_encoder_widths(spec)):
            shapes[f"enc.conv{k}.weight"] = (spec.order, fan_in, fan_out)
            shapes[f"enc.conv{k}.bias"] = (fan_out,)
        shapes["enc.fc.weight"] = (bottleneck, spec.latent)
        shapes["enc.fc.bias"] = (spec.latent,)
        shapes["dec.fc.weight"] = (spec.latent, bottleneck)
        shapes["dec.fc.bias"] = (bottleneck,)
        for k, (fan_in, fan_out) in zip(
            range(self.levels - 1, -1, -1), _decoder_widths(spec)
        ):
            shapes[f"dec.conv{k}.weight"] = (spec.order, fan_in, fan_out)
            shapes[f"dec.conv{k}.bias"] = (fan_out,)
        return shapes

    def init_params(self, seed: int) -> NetworkParams:
        """Uniform init scaled by 1/sqrt(fan_in * order) for convolutions
        and 1/sqrt(fan_in) for dense maps; biases start at zero.

        Tensors are drawn in a fixed architectural order so a seed pins the
        whole parameter state.
        """
        rng = np.random.default_rng(seed)
        tensors: dict[str, np.ndarray] = {}
        for name, shape in self.param_shapes().items():
            if name.endswith("bias"):
                tensors[name] = np.zeros(shape, dtype=np.float64)
            elif ".conv" in name:
                _, fan_in, _ = shape
                bound = 1.0 / np.sqrt(fan_in * self.spec.order)
                tensors[name] = rng.uniform(-bound, bound, size=shape)
            else:
                fan_in = shape[0]
                bound = 1.0 / np.sqrt(fan_in)
                tensors[name] = rng.uniform(-bound, bound, size=shape)
        return NetworkParams(tensors)

    def _conv(self, params: NetworkParams, name: str) -> ChebConv:
        return ChebConv(params.tensors[f"{name}.weight"], params.tensors[f"{name}.bias"])

    def _dense(self, params: NetworkParams, name: str) -> Dense:
        return Dense(params.tensors[f"{name}.weight"], params.tensors[f"{name}.bias"])

    # ---- forward ----

    @staticmethod
    def _batched(x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            return x[None], True
        return x, False

    def encode_cached(self, params: NetworkParams, x: np.ndarray):
        xb, squeeze = self._batched(x)
        slope = self.spec.relu_slope
        cache = {"inputs": [], "bases": [], "preacts": []}
        h = xb
        for k in range(self.levels):
            conv = self._conv(params, f"enc.conv{k}")
            y, basis = cheb_conv_forward_cached(conv, self.laplacians[k], h)
            a = leaky_relu(y, slope)
            cache["inputs"].append(h)
            cache["bases"].append(basis)
            cache["preacts"].append(y)
            h = _apply_transform(self.hierarchy.downs[k], a)
        batch = h.shape[0]
        flat = h.reshape(batch, -1)
        cache["flat"] = flat
        z = dense_forward(self._dense(params, "enc.fc"), flat)
        cache["squeeze"] = squeeze
        return z, cache

    def encode(self, params: NetworkParams, x: np.ndarray) -> np.ndarray:
        z, cache = self.encode_cached(params, x)
        return z[0] if cache["squeeze"] else z

    def decode_cached(self, params: NetworkParams, z: np.ndarray):
        zb = np.asarray(z, dtype=np.float64)
        squeeze = zb.ndim == 1
        if squeeze:
            zb = zb[None]
        slope = self.spec.relu_slope
        coarse = self.hierarchy.level_sizes[-1]
        width = self.spec.filters[-1]
        cache = {"z": zb, "inputs": [], "bases": [], "preacts": [], "squeeze": squeeze}
        flat = dense_forward(self._dense(params, "dec.fc"), zb)
        g = flat.reshape(zb.shape[0], coarse, width)
        cache["coarse"] = g
        for k in range(self.levels - 1, -1, -1):
            u = _apply_transform(self.hierarchy.ups[k], g)
            conv = self._conv(params, f"dec.conv{k}")
            y, basis = cheb_conv_forward_cached(conv, self.laplacians[k], u)
            cache["inputs"].append(u)
            cache["bases"].append(basis)
            cache["preacts"].append(y)
            g = leaky_relu(y, slope) if k > 0 else y
        return g, cache

    def decode(self, params: NetworkParams, z: np.ndarray) -> np.ndarray:
        recon, cache = self.decode_cached(params, z)
        return recon[0] if cache["squeeze"] else recon

    def forward(self, params: NetworkParams, x: np.ndarray):
        """Full pass returning (reconstruction, latent)."""
        z, enc_cache = self.encode_cached(params, x)
        recon, dec_cache = self.decode_cached(params, z)
        if enc_cache["squeeze"]:
            return recon[0], z[0]
        return recon, z

    # ---- backward ----

    def decode_backward(
        self,
        params: NetworkParams,
        cache: dict,
        grad_recon: np.ndarray,
        want_param_grads: bool = True,
    ):
        """Backpropagate through the decoder.

        Returns (grad_z, param_grads). ``want_param_grads=False`` skips
        weight/bias accumulation (frozen-decoder use)."""
        grad = np.asarray(grad_recon, dtype=np.float64)
        if grad.ndim == 2:
            grad = grad[None]
        slope = self.spec.relu_slope
        grads: dict[str, np.ndarray] = {}
        idx = len(cache["inputs"]) - 1
        for k in range(self.levels):
            # cache lists run coarse-to-fine; walk them fine-to-coarse
            y = cache["preacts"][idx]
            u = cache["inputs"][idx]
            basis = cache["bases"][idx]
            if k > 0:
                grad = leaky_relu_backward(y, grad, slope)
            conv = self._conv(params, f"dec.conv{k}")
            gx, gw, gb = cheb_conv_backward(conv, self.laplacians[k], u, grad, basis)
            if want_param_grads:
                grads[f"dec.conv{k}.weight"] = gw
                grads[f"dec.conv{k}.bias"] = gb
            grad = _apply_transform(self.ups_t[k], gx)
            idx -= 1
        batch = grad.shape[0]
        flat_grad = grad.reshape(batch, -1)
        dense = self._dense(params, "dec.fc")
        gz, gw, gb = dense_backward(dense, cache["z"], flat_grad)
        if want_param_grads:
            grads["dec.fc.weight"] = gw
            grads["dec.fc.bias"] = gb
        return gz, grads

    def encode_backward(self, params: NetworkParams, cache: dict, grad_z: np.ndarray):
        """Backpropagate through the encoder, returning param grads."""
        grad_z = np.asarray(grad_z, dtype=np.float64)
        if grad_z.ndim == 1:
            grad_z = grad_z[None]
        slope = self.spec.relu_slope
        grads: dict[str, np.ndarray] = {}
        dense = self._dense(params, "enc.fc")
        gflat, gw, gb = dense_backward(dense, cache["flat"], grad_z)
        grads["enc.fc.weight"] = gw
        grads["enc.fc.bias"] = gb
        coarse = self.hierarchy.level_sizes[-1]
        grad = gflat.reshape(gflat.shape[0], coarse, self.spec.filters[-1])
        for k in range(self.levels - 1, -1, -1):
            grad = _apply_transform(self.downs_t[k], grad)
            grad = leaky_relu_backward(cache["preacts"][k], grad, slope)
            conv = self._conv(params, f"enc.conv{k}")
            gx, gw, gb = cheb_conv_backward(
                conv, self.laplacians[k], cache["inputs"][k], grad, cache["bases"][k]
            )
            grads[f"enc.conv{k}.weight"] = gw
            grads[f"enc.conv{k}.bias"] = gb
            grad = gx
        return grads, grad

    # ---- training objective ----

    def loss_and_grads(
        self,
        params: NetworkParams,
        batch: np.ndarray,
        lambda_latent: float = 5e-7,
        lambda_weights: float = 5e-5,
    ):
        """Autoencoder objective and exact parameter gradients.

        loss = mean |recon - target| over all vertex coordinates
             + lambda_latent * mean_b ||z_b||^2
             + lambda_weights * sum_W ||W||^2   (weights only, biases exempt)

        Returns (loss, grads dict, stats dict). The L1 subgradient at zero
        is taken as zero.
        """
        xb, _ = self._batched(batch)
        z, enc_cache = self.encode_cached(params, xb)
        recon, dec_cache = self.decode_cached(params, z)
        batch_size = xb.shape[0]

        diff = recon - xb
        l1 = float(np.abs(diff).mean())
        grad_recon = np.sign(diff) / diff.size

        latent_term = float(lambda_latent * (z**2).sum() / batch_size)
        grad_z_extra = (2.0 * lambda_latent / batch_size) * z

        gz_dec, grads = self.decode_backward(params, dec_cache, grad_recon)
        enc_grads, _ = self.encode_backward(params, enc_cache, gz_dec + grad_z_extra)
        grads.update(enc_grads)

        weight_term = 0.0
        if lambda_weights:
            for name, tensor in params.tensors.items():
                if name.endswith("bias"):
                    continue
                weight_term += float((tensor**2).sum())
                grads[name] += 2.0 * lambda_weights * tensor
            weight_term *= lambda_weights

        loss = l1 + latent_term + weight_term
        stats = {"l1": l1, "latent_term": latent_term, "weight_term": weight_term}
        return loss, grads, stats


def ae_loss(
    recon: np.ndarray,
    target: np.ndarray,
    latent: np.ndarray,
    params: NetworkParams,
    lambda_latent: float = 5e-7,
    lambda_weights: float = 5e-5,
):
    """Standalone objective for a single reconstruction.

    Returns (loss, grad_recon, grad_latent). The weight-norm term uses the
    parameter map's weight tensors only; its gradient is
    2 * lambda_weights * W per weight, exposed through
    :meth:`Autoencoder.loss_and_grads` during training.
    """
    recon = np.asarray(recon, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    latent = np.asarray(latent, dtype=np.float64)
    diff = recon - target
    l1 = float(np.abs(diff).mean())
    grad_recon = np.sign(diff) / diff.size
    latent_term = float(lambda_latent * (latent**2).sum())
    grad_latent = 2.0 * lambda_latent * latent
    weight_term = 0.0
    for name, tensor in params.tensors.items():
        if not name.endswith("bias"):
            weight_term += float((tensor**2).sum())
    weight_term *= lambda_weights
    return l1 + latent_term + weight_term, grad_recon, grad_latent
