"""Observation encoder trained against a frozen mesh decoder.

An MLP maps a keypoint observation vector to Z + 6 outputs: a mesh
embedding fed to the (frozen) decoder and a camera embedding (log-scale,
axis-angle rotation, pixel shift). Training minimizes mesh L1 plus a
weighted keypoint reprojection L1 plus a weighted L2 norm of the mesh
embedding; the reprojection term's gradient is blocked from the mesh
embedding so it can only steer the camera head, and the decoder never
receives parameter gradients.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .camera import WeakPerspectiveCamera, keypoint_loss, project
from .mesh import Topology, TriMesh
from .nn.checkpoint import load_autoencoder
from .nn.layers import Dense, dense_backward, dense_forward, leaky_relu, leaky_relu_backward
from .nn.network import Autoencoder, NetworkParams
from .nn.optim import AdamW

ENCODER_METRIC_FIELDS = ("epoch", "split", "mesh_l1_mm", "reproj_px")
CAMERA_OUTPUTS = 6  # log scale, axis-angle rotation, pixel translation


class UnfrozenDecoderError(ValueError):
    """The pipeline loss only accepts decoders wrapped as frozen."""


@dataclass(frozen=True)
class EncoderSpec:
    """MLP trunk: input -> hidden... -> latent + 6 camera outputs."""

    input_size: int
    hidden: tuple[int, ...]
    latent: int
    relu_slope: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_size < 1 or self.latent < 1:
            raise ValueError("input_size and latent must be positive")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be positive")

    @property
    def output_size(self) -> int:
        return self.latent + CAMERA_OUTPUTS

    @property
    def widths(self) -> list[tuple[int, int]]:
        dims = [self.input_size, *self.hidden, self.output_size]
        return list(zip(dims[:-1], dims[1:]))

    def to_dict(self) -> dict:
        return {
            "input_size": self.input_size,
            "hidden": list(self.hidden),
            "latent": self.latent,
            "relu_slope": self.relu_slope,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EncoderSpec":
        return cls(
            input_size=int(data["input_size"]),
            hidden=tuple(int(h) for h in data["hidden"]),
            latent=int(data["latent"]),
            relu_slope=float(data["relu_slope"]),
        )


def init_encoder_params(spec: EncoderSpec, seed: int = 0) -> NetworkParams:
    """Uniform +-1/sqrt(fan_in) weights, zero biases, fixed draw order."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for k, (fan_in, fan_out) in enumerate(spec.widths):
        bound = 1.0 / np.sqrt(fan_in)
        tensors[f"fc{k}.weight"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        tensors[f"fc{k}.bias"] = np.zeros(fan_out)
    return NetworkParams(tensors)


def _layer(params: NetworkParams, k: int) -> Dense:
    return Dense(
        weight=params.tensors[f"fc{k}.weight"], bias=params.tensors[f"fc{k}.bias"]
    )


def encoder_apply(spec: EncoderSpec, params: NetworkParams, x: np.ndarray):
    """Batched forward pass, (B, input) -> (B, Z + 6), plus backward cache."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != spec.input_size:
        raise ValueError(f"expected {spec.input_size} input features, got {x.shape[1]}")
    num_layers = len(spec.widths)
    cache = {"inputs": [], "preacts": []}
    h = x
    for k in range(num_layers):
        cache["inputs"].append(h)
        y = dense_forward(_layer(params, k), h)
        cache["preacts"].append(y)
        h = leaky_relu(y, spec.relu_slope) if k < num_layers - 1 else y
    return h, cache


def encoder_backward(
    spec: EncoderSpec, params: NetworkParams, cache: dict, grad_out: np.ndarray
) -> dict[str, np.ndarray]:
    """Parameter gradients for a cached forward pass."""
    grads: dict[str, np.ndarray] = {}
    grad = np.asarray(grad_out, dtype=np.float64)
    for k in reversed(range(len(spec.widths))):
        if k < len(spec.widths) - 1:
            grad = leaky_relu_backward(cache["preacts"][k], grad, spec.relu_slope)
        grad, grads[f"fc{k}.weight"], grads[f"fc{k}.bias"] = dense_backward(
            _layer(params, k), cache["inputs"][k], grad
        )
    return grads


def camera_from_outputs(vec: np.ndarray) -> WeakPerspectiveCamera:
    """Camera head decoding; scale through exp so it is always positive."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (CAMERA_OUTPUTS,):
        raise ValueError(f"camera head must have {CAMERA_OUTPUTS} outputs")
    return WeakPerspectiveCamera(
        scale=float(np.exp(vec[0])), rotation=vec[1:4], translation=vec[4:6]
    )


def encoder_forward(spec: EncoderSpec, params: NetworkParams, observation):
    """Single observation -> (latent (Z,), WeakPerspectiveCamera)."""
    out, _ = encoder_apply(spec, params, observation)
    z = out[0, : spec.latent]
    return z, camera_from_outputs(out[0, spec.latent :])


# ---- frozen decoder ----


class FrozenDecoder:
    """Read-only decoder wrapper; the only decoder pipeline_loss accepts.

    Parameter arrays are copied and marked non-writeable, so accidental
    in-place updates raise instead of corrupting the generator.
    """

    def __init__(self, model: Autoencoder, params: NetworkParams):
        self.model = model
        frozen = params.copy()
        for arr in frozen.tensors.values():
            arr.flags.writeable = False
        self.params = frozen
        self.frozen = True

    @classmethod
    def from_checkpoint(cls, path) -> "FrozenDecoder":
        ckpt = load_autoencoder(path)
        return cls(Autoencoder(ckpt.spec, ckpt.hierarchy), ckpt.params)

    @property
    def latent(self) -> int:
        return self.model.spec.latent

    @property
    def topology(self) -> Topology:
        return self.model.hierarchy.reference.topology

    @property
    def num_vertices(self) -> int:
        return self.topology.num_vertices

    def fingerprint(self) -> str:
        """Order-independent content hash of all parameter tensors."""
        import hashlib

        digest = hashlib.sha256()
        for name in sorted(self.params.tensors):
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(self.params.tensors[name]).tobytes())
        return digest.hexdigest()

    def decode_cached(self, z: np.ndarray):
        return self.model.decode_cached(self.params, z)

    def decode(self, z: np.ndarray) -> np.ndarray:
        return self.model.decode(self.params, z)

    def backward(self, cache: dict, grad_recon: np.ndarray) -> np.ndarray:
        grad_z, grads = self.model.decode_backward(
            self.params, cache, grad_recon, want_param_grads=False
        )
        assert not grads  # freezing contract: no parameter gradients exist
        return grad_z


# ---- Eq.-style composite loss ----


@dataclass
class EncoderBatch:
    """Aligned arrays for one training batch."""

    observations: np.ndarray  # (B, d)
    target_vertices: np.ndarray  # (B, n, 3)
    keypoints2d: np.ndarray  # (B, J, 2)
    visibility: np.ndarray  # (B, J)


def pipeline_loss(
    spec: EncoderSpec,
    params: NetworkParams,
    decoder: FrozenDecoder,
    joint_matrix,
    batch: EncoderBatch,
    *,
    lambda_mesh: float = 1.0,
    lambda_kpts: float = 0.01,
    lambda_embed: float = 5e-5,
):
    """Composite loss and encoder gradients for one batch.

    Terms: lambda_mesh * mean-abs mesh reconstruction, lambda_kpts *
    mean-abs keypoint reprojection, lambda_embed * mean ||z||_2 (unsquared,
    mesh embedding only). The reprojection gradient reaches only the camera
    head: its path through the decoder and mesh embedding is zeroed by
    construction, and the decoder contributes no parameter gradients.
    lambda_mesh exists so the terms can be isolated when auditing gradient
    flow; training leaves it at 1.

    Returns (loss, gradients by parameter name, parts) where parts holds
    the unweighted terms (mesh_l1, reproj_px, embed_norm).
    """
    if not isinstance(decoder, FrozenDecoder) or not decoder.frozen:
        raise UnfrozenDecoderError(
            "pipeline_loss requires the decoder wrapped in FrozenDecoder"
        )
    obs = np.atleast_2d(np.asarray(batch.observations, dtype=np.float64))
    targets = np.asarray(batch.target_vertices, dtype=np.float64)
    batch_size = len(obs)

    out, mlp_cache = encoder_apply(spec, params, obs)
    z = out[:, : spec.latent]
    cam_raw = out[:, spec.latent :]
    recon, dec_cache = decoder.decode_cached(z)

    coords = recon.size
    diff = recon - targets
    mesh_l1 = float(np.abs(diff).mean())
    grad_recon_mesh = lambda_mesh * np.sign(diff) / coords

    reproj = 0.0
    grad_cam_raw = np.zeros_like(cam_raw)
    for b in range(batch_size):
        camera = camera_from_outputs(cam_raw[b])
        joints = np.asarray(joint_matrix @ recon[b])
        loss_b, cam_grads, _ = keypoint_loss(
            camera, joints, batch.keypoints2d[b], batch.visibility[b]
        )
        reproj += loss_b
        # log-scale chain rule: d/d raw_scale = s * d/d s
        grad_cam_raw[b, 0] = camera.scale * cam_grads.scale
        grad_cam_raw[b, 1:4] = cam_grads.rotation
        grad_cam_raw[b, 4:6] = cam_grads.translation
        # the keypoint path through joints -> recon -> z is deliberately
        # dropped here: reprojection may steer only the camera branch
    reproj /= batch_size

    norms = np.linalg.norm(z, axis=1)
    embed = float(norms.mean())
    safe = np.where(norms > 0, norms, 1.0)
    grad_z_embed = (lambda_embed / batch_size) * z / safe[:, None]

    loss = lambda_mesh * mesh_l1 + lambda_kpts * reproj + lambda_embed * embed

    grad_z = decoder.backward(dec_cache, grad_recon_mesh) + grad_z_embed
    grad_out = np.concatenate(
        [grad_z, (lambda_kpts / batch_size) * grad_cam_raw], axis=1
    )
    grads = encoder_backward(spec, params, mlp_cache, grad_out)
    parts = {"mesh_l1": mesh_l1, "reproj_px": reproj, "embed_norm": embed}
    return loss, grads, parts


# ---- observations ----


def observation_size(num_keypoints: int, include_3d: bool = True) -> int:
    return num_keypoints * (2 + 1 + (3 if include_3d else 0))


def observation_vector(keypoints2d, visibility, keypoints3d=None) -> np.ndarray:
    """Flatten one sample's observation: [kpts2d, visibility(, kpts3d)]."""
    parts = [
        np.asarray(keypoints2d, dtype=np.float64).ravel(),
        np.asarray(visibility, dtype=np.float64).ravel(),
    ]
    if keypoints3d is not None:
        parts.append(np.asarray(keypoints3d, dtype=np.float64).ravel())
    return np.concatenate(parts)


def build_observations(dataset, indices, include_3d: bool = True) -> np.ndarray:
    """Stack clean observation vectors for the given sample indices."""
    rows = [
        observation_vector(
            dataset.keypoints2d(i),
            dataset.visibility(i),
            dataset.keypoints3d(i) if include_3d else None,
        )
        for i in indices
    ]
    return np.asarray(rows)


def normalize_observations(obs: np.ndarray, input_norm: dict) -> np.ndarray:
    return (obs - input_norm["mean"]) / input_norm["std"]


# ---- training ----


@dataclass
class EncoderTrainConfig:
    epochs: int = 130
    batch_size: int = 64
    lr: float = 1e-4
    weight_decay: float = 1e-5
    lambda_kpts: float = 0.01
    lambda_embed: float = 5e-5
    hidden: tuple[int, ...] = (256, 256)
    include_3d: bool = True
    keypoint_noise: float = 0.02  # std of 3-D keypoint augmentation, canonical units
    seed: int = 0
    target_l1: float | None = None
    min_epochs: int = 0


def evaluate_encoder(
    spec: EncoderSpec,
    params: NetworkParams,
    decoder: FrozenDecoder,
    joint_matrix,
    batch: EncoderBatch,
    batch_size: int = 64,
) -> tuple[float, float]:
    """(mesh L1, reprojection px) on a full split, batched."""
    total_abs = 0.0
    total_coords = 0
    reproj_sum = 0.0
    count = len(batch.observations)
    for start in range(0, count, batch_size):
        sl = slice(start, start + batch_size)
        out, _ = encoder_apply(spec, params, batch.observations[sl])
        z = out[:, : spec.latent]
        recon = decoder.decode(z)
        if recon.ndim == 2:
            recon = recon[None]
        diff = np.abs(recon - batch.target_vertices[sl])
        total_abs += float(diff.sum())
        total_coords += diff.size
        for b in range(len(out)):
            camera = camera_from_outputs(out[b, spec.latent :])
            joints = np.asarray(joint_matrix @ recon[b])
            loss_b, _, _ = keypoint_loss(
                camera, joints, batch.keypoints2d[sl][b], batch.visibility[sl][b]
            )
            reproj_sum += loss_b
    return total_abs / total_coords, reproj_sum / count


def _batch_for(dataset, indices, observations) -> EncoderBatch:
    ids = list(indices)
    return EncoderBatch(
        observations=observations,
        target_vertices=dataset.vertices[ids],
        keypoints2d=np.asarray([dataset.keypoints2d(i) for i in ids]),
        visibility=np.asarray([dataset.visibility(i) for i in ids]),
    )


def train_encoder(
    dataset,
    decoder: FrozenDecoder,
    joint_matrix,
    config: EncoderTrainConfig,
    params: NetworkParams | None = None,
):
    """Train the encoder against a frozen decoder.

    Returns (spec, params, optimizer, input_norm, metrics). Metric rows
    follow ENCODER_METRIC_FIELDS, split-tagged with one train and one val
    row per epoch. Deterministic for a fixed config; the decoder is never
    modified.
    """
    if decoder.num_vertices != dataset.topology.num_vertices:
        raise ValueError(
            f"decoder generates {decoder.num_vertices} vertices, dataset has "
            f"{dataset.topology.num_vertices}"
        )
    train_ids = dataset.indices("train")
    val_ids = dataset.indices("val")
    raw_train = build_observations(dataset, train_ids, config.include_3d)
    raw_val = build_observations(dataset, val_ids, config.include_3d)
    mean = raw_train.mean(axis=0)
    std = np.maximum(raw_train.std(axis=0), 1e-8)
    input_norm = {"mean": mean, "std": std}

    spec = EncoderSpec(
        input_size=raw_train.shape[1],
        hidden=config.hidden,
        latent=decoder.latent,
    )
    if params is None:
        params = init_encoder_params(spec, seed=config.seed)
    optimizer = AdamW(lr=config.lr, weight_decay=config.weight_decay)

    train_obs = normalize_observations(raw_train, input_norm)
    val_batch = _batch_for(dataset, val_ids, normalize_observations(raw_val, input_norm))

    # noise column range: the 3-D block sits after the 2-D and visibility blocks
    num_kpts = dataset.num_keypoints
    noise_start = num_kpts * 3
    shuffle_rng = np.random.default_rng(config.seed)
    noise_rng = np.random.default_rng([config.seed, 1])

    metrics: list[dict] = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(train_ids))
        epoch_parts = np.zeros(2)
        batches = 0
        for start in range(0, len(order), config.batch_size):
            chosen = order[start : start + config.batch_size]
            ids = [train_ids[i] for i in chosen]
            obs = train_obs[chosen].copy()
            if config.include_3d and config.keypoint_noise > 0:
                # augmentation in normalized units, 3-D block only
                obs[:, noise_start:] += noise_rng.normal(
                    0.0,
                    config.keypoint_noise,
                    size=obs[:, noise_start:].shape,
                ) / std[noise_start:]
            batch = _batch_for(dataset, ids, obs)
            _, grads, parts = pipeline_loss(
                spec,
                params,
                decoder,
                joint_matrix,
                batch,
                lambda_kpts=config.lambda_kpts,
                lambda_embed=config.lambda_embed,
            )
            optimizer.step(params.tensors, grads)
            epoch_parts += (parts["mesh_l1"], parts["reproj_px"])
            batches += 1
        train_mesh, train_px = epoch_parts / max(batches, 1)
        val_mesh, val_px = evaluate_encoder(
            spec, params, decoder, joint_matrix, val_batch, config.batch_size
        )
        metrics.append(
            {
                "epoch": epoch,
                "split": "train",
                "mesh_l1_mm": train_mesh,
                "reproj_px": train_px,
            }
        )
        metrics.append(
            {
                "epoch": epoch,
                "split": "val",
                "mesh_l1_mm": val_mesh,
                "reproj_px": val_px,
            }
        )
        if (
            config.target_l1 is not None
            and epoch + 1 >= config.min_epochs
            and val_mesh < config.target_l1
        ):
            break
    return spec, params, optimizer, input_norm, metrics


@dataclass
class Prediction:
    mesh: TriMesh
    joints2d: np.ndarray
    camera: WeakPerspectiveCamera
    latent: np.ndarray
    decoder_ms: float


def predict(
    spec: EncoderSpec,
    params: NetworkParams,
    input_norm: dict,
    decoder: FrozenDecoder,
    joint_matrix,
    observation,
) -> Prediction:
    """Run the full two-branch model on one raw observation vector.

    The decoder pass is timed (wall clock) and reported in milliseconds;
    joints2d is exactly project(camera, joints(mesh)).
    """
    obs = normalize_observations(
        np.asarray(observation, dtype=np.float64)[None, :], input_norm
    )
    z, camera = encoder_forward(spec, params, obs)
    start = time.perf_counter()
    vertices = decoder.decode(z)
    decoder_ms = (time.perf_counter() - start) * 1e3
    mesh = TriMesh(decoder.topology, vertices)
    joints = np.asarray(joint_matrix @ vertices)
    return Prediction(
        mesh=mesh,
        joints2d=project(camera, joints),
        camera=camera,
        latent=z,
        decoder_ms=decoder_ms,
    )
