"""Self-describing checkpoint container (.gmm files).

Layout: 4-byte magic, 8-byte little-endian manifest length, canonical JSON
manifest (sorted keys, no whitespace), then raw little-endian tensor blobs
in manifest order. No timestamps or environment data are written, so
save -> load -> save produces byte-identical files.

Autoencoder checkpoints carry the network spec, parameters, optimizer
state, pooling hierarchy, and training latent statistics. Encoder
checkpoints use a distinct section tag and carry the observation-encoder
spec, parameters, input normalization, and the decoder file hash they were
trained against.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from ..coarsen import MeshHierarchy
from ..mesh import Topology, TriMesh
from .network import Autoencoder, NetworkParams, NetworkSpec
from .optim import AdamW

MAGIC = b"GMMC"
FORMAT_VERSION = 1

_DTYPES = {"<f8": np.dtype("<f8"), "<i8": np.dtype("<i8")}


class CheckpointError(ValueError):
    """Malformed or inconsistent checkpoint file."""


class VersionError(CheckpointError):
    """Unsupported container format version."""


class ShapeMismatchError(CheckpointError):
    """Tensor bytes or shape disagree with the manifest or the spec."""


class SpecMismatchError(CheckpointError):
    """Checkpoint was produced under a different network spec."""


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_container(path, kind: str, sections: dict, tensors: dict[str, np.ndarray]) -> None:
    names = sorted(tensors)
    table = {}
    offset = 0
    blobs = []
    for name in names:
        arr = np.asarray(tensors[name])
        if arr.dtype.kind == "f":
            arr = np.ascontiguousarray(arr, dtype="<f8")
            dtype = "<f8"
        elif arr.dtype.kind in "iu":
            arr = np.ascontiguousarray(arr, dtype="<i8")
            dtype = "<i8"
        else:
            raise CheckpointError(f"tensor {name} has unsupported dtype {arr.dtype}")
        blob = arr.tobytes()
        table[name] = {
            "dtype": dtype,
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(blob),
        }
        blobs.append(blob)
        offset += len(blob)

    manifest = {
        "format": "gmm",
        "version": FORMAT_VERSION,
        "kind": kind,
        "sections": sections,
        "tensors": table,
    }
    manifest_bytes = _canonical_json(manifest)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(manifest_bytes).to_bytes(8, "little"))
        fh.write(manifest_bytes)
        for blob in blobs:
            fh.write(blob)


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint container (bad magic)")
    mlen = int.from_bytes(raw[4:12], "little")
    try:
        manifest = json.loads(raw[12 : 12 + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt manifest: {exc}") from None
    if manifest.get("version") != FORMAT_VERSION:
        raise VersionError(
            f"{path}: container version {manifest.get('version')} is not "
            f"supported (expected {FORMAT_VERSION})"
        )
    base = 12 + mlen
    tensors: dict[str, np.ndarray] = {}
    for name, entry in manifest["tensors"].items():
        dtype = _DTYPES[entry["dtype"]]
        shape = tuple(entry["shape"])
        expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if shape else dtype.itemsize
        if entry["nbytes"] != expected:
            raise ShapeMismatchError(
                f"{path}: tensor {name} declares {entry['nbytes']} bytes but "
                f"shape {shape} needs {expected}"
            )
        start = base + entry["offset"]
        stop = start + entry["nbytes"]
        if stop > len(raw):
            raise ShapeMismatchError(
                f"{path}: tensor {name} extends past end of file"
            )
        arr = np.frombuffer(raw[start:stop], dtype=dtype).reshape(shape).copy()
        tensors[name] = arr.astype(np.float64 if dtype.kind == "f" else np.int64)
    return manifest, tensors


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---- hierarchy <-> tensors ----


def _hierarchy_tensors(h: MeshHierarchy) -> tuple[dict, dict[str, np.ndarray]]:
    meta = {
        "factors": [int(f) for f in h.factors],
        "level_sizes": [int(s) for s in h.level_sizes],
    }
    tensors: dict[str, np.ndarray] = {
        "hierarchy.reference.vertices": h.reference.vertices
    }
    for k, topo in enumerate(h.levels):
        tensors[f"hierarchy.level{k}.faces"] = topo.faces
    for k in range(len(h.downs)):
        for tag, mat in (("down", h.downs[k]), ("up", h.ups[k])):
            mat = mat.tocsr()
            tensors[f"hierarchy.{tag}{k}.indptr"] = np.asarray(mat.indptr, dtype=np.int64)
            tensors[f"hierarchy.{tag}{k}.indices"] = np.asarray(mat.indices, dtype=np.int64)
            tensors[f"hierarchy.{tag}{k}.data"] = np.asarray(mat.data, dtype=np.float64)
    return meta, tensors


def _hierarchy_from_tensors(meta: dict, tensors: dict[str, np.ndarray]) -> MeshHierarchy:
    sizes = [int(s) for s in meta["level_sizes"]]
    factors = tuple(int(f) for f in meta["factors"])
    levels = [
        Topology(sizes[k], tensors[f"hierarchy.level{k}.faces"])
        for k in range(len(sizes))
    ]
    downs, ups = [], []
    for k in range(len(sizes) - 1):
        down = sparse.csr_matrix(
            (
                tensors[f"hierarchy.down{k}.data"],
                tensors[f"hierarchy.down{k}.indices"],
                tensors[f"hierarchy.down{k}.indptr"],
            ),
            shape=(sizes[k + 1], sizes[k]),
        )
        up = sparse.csr_matrix(
            (
                tensors[f"hierarchy.up{k}.data"],
                tensors[f"hierarchy.up{k}.indices"],
                tensors[f"hierarchy.up{k}.indptr"],
            ),
            shape=(sizes[k], sizes[k + 1]),
        )
        downs.append(down)
        ups.append(up)
    reference = TriMesh(levels[0], tensors["hierarchy.reference.vertices"])
    positions = [reference.vertices.copy()]
    for k in range(len(downs)):
        positions.append(downs[k] @ positions[-1])
    return MeshHierarchy(
        levels=levels,
        downs=downs,
        ups=ups,
        factors=factors,
        reference=reference,
        level_positions=positions,
    )


# ---- autoencoder checkpoints ----


@dataclass
class AutoencoderCheckpoint:
    spec: NetworkSpec
    params: NetworkParams
    hierarchy: MeshHierarchy
    optimizer: AdamW | None
    latent_stats: dict[str, np.ndarray] | None
    manifest: dict


def save_autoencoder(
    path,
    spec: NetworkSpec,
    params: NetworkParams,
    hierarchy: MeshHierarchy,
    optimizer: AdamW | None = None,
    latent_stats: dict[str, np.ndarray] | None = None,
) -> None:
    meta, tensors = _hierarchy_tensors(hierarchy)
    sections = {
        "network_spec": spec.to_dict(),
        "params_version": params.version,
        "hierarchy": meta,
        "optimizer": optimizer.hyper() if optimizer is not None else None,
    }
    for name, arr in params.tensors.items():
        tensors[f"params.{name}"] = arr
    if optimizer is not None:
        for name, arr in optimizer.state_tensors().items():
            tensors[f"opt.{name}"] = arr
    if latent_stats is not None:
        tensors["latent_stats.mean"] = latent_stats["mean"]
        tensors["latent_stats.std"] = latent_stats["std"]
    write_container(path, "autoencoder", sections, tensors)


def load_autoencoder(path, expect_spec: NetworkSpec | None = None) -> AutoencoderCheckpoint:
    manifest, tensors = read_container(path)
    if manifest.get("kind") != "autoencoder":
        raise CheckpointError(
            f"{path}: expected an autoencoder checkpoint, found "
            f"{manifest.get('kind')!r}"
        )
    sections = manifest["sections"]
    spec = NetworkSpec.from_dict(sections["network_spec"])
    if expect_spec is not None and spec != expect_spec:
        raise SpecMismatchError(
            f"{path}: checkpoint spec {spec} does not match expected {expect_spec}"
        )
    hierarchy = _hierarchy_from_tensors(sections["hierarchy"], tensors)

    model = Autoencoder(spec, hierarchy)
    expected_shapes = model.param_shapes()
    params_tensors: dict[str, np.ndarray] = {}
    for name, shape in expected_shapes.items():
        key = f"params.{name}"
        if key not in tensors:
            raise ShapeMismatchError(f"{path}: missing parameter tensor {name}")
        arr = tensors[key]
        if tuple(arr.shape) != shape:
            raise ShapeMismatchError(
                f"{path}: parameter {name} has shape {tuple(arr.shape)}, "
                f"expected {shape}"
            )
        params_tensors[name] = arr
    params = NetworkParams(params_tensors, version=sections.get("params_version", "1"))

    optimizer = None
    if sections.get("optimizer") is not None:
        opt_tensors = {
            name[len("opt.") :]: arr
            for name, arr in tensors.items()
            if name.startswith("opt.")
        }
        optimizer = AdamW.from_state(sections["optimizer"], opt_tensors)

    latent_stats = None
    if "latent_stats.mean" in tensors:
        latent_stats = {
            "mean": tensors["latent_stats.mean"],
            "std": tensors["latent_stats.std"],
        }
    return AutoencoderCheckpoint(
        spec=spec,
        params=params,
        hierarchy=hierarchy,
        optimizer=optimizer,
        latent_stats=latent_stats,
        manifest=manifest,
    )


# ---- observation-encoder checkpoints ----


@dataclass
class EncoderCheckpoint:
    spec_dict: dict
    params: NetworkParams
    input_norm: dict[str, np.ndarray]
    decoder_sha256: str | None
    optimizer: AdamW | None
    manifest: dict


def save_encoder(
    path,
    spec_dict: dict,
    params: NetworkParams,
    input_norm: dict[str, np.ndarray],
    decoder_sha256: str | None = None,
    optimizer: AdamW | None = None,
) -> None:
    sections = {
        "encoder_spec": spec_dict,
        "params_version": params.version,
        "decoder_sha256": decoder_sha256,
        "optimizer": optimizer.hyper() if optimizer is not None else None,
    }
    tensors: dict[str, np.ndarray] = {}
    for name, arr in params.tensors.items():
        tensors[f"params.{name}"] = arr
    tensors["input_norm.mean"] = input_norm["mean"]
    tensors["input_norm.std"] = input_norm["std"]
    if optimizer is not None:
        for name, arr in optimizer.state_tensors().items():
            tensors[f"opt.{name}"] = arr
    write_container(path, "encoder", sections, tensors)


def load_encoder(path) -> EncoderCheckpoint:
    manifest, tensors = read_container(path)
    if manifest.get("kind") != "encoder":
        raise CheckpointError(
            f"{path}: expected an encoder checkpoint, found {manifest.get('kind')!r}"
        )
    sections = manifest["sections"]
    params_tensors = {
        name[len("params.") :]: arr
        for name, arr in tensors.items()
        if name.startswith("params.")
    }
    params = NetworkParams(params_tensors, version=sections.get("params_version", "1"))
    optimizer = None
    if sections.get("optimizer") is not None:
        opt_tensors = {
            name[len("opt.") :]: arr
            for name, arr in tensors.items()
            if name.startswith("opt.")
        }
        optimizer = AdamW.from_state(sections["optimizer"], opt_tensors)
    input_norm = {
        "mean": tensors["input_norm.mean"],
        "std": tensors["input_norm.std"],
    }
    return EncoderCheckpoint(
        spec_dict=sections["encoder_spec"],
        params=params,
        input_norm=input_norm,
        decoder_sha256=sections.get("decoder_sha256"),
        optimizer=optimizer,
        manifest=manifest,
    )
