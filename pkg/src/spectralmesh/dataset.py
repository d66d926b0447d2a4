"""Synthetic dataset generation and loading.

The generator runs the full ground-truth pipeline: procedural
registrations from a rig, generalized Procrustes alignment into the
canonical frame, a PCA shape basis, a k-means pose cluster book, then
per-sample (pose, shape) draws skinned and centered, with keypoints
projected through a randomly sampled weak-perspective camera.

On disk a dataset is a directory: manifest.json (array of sample
records), meta.json, meshes/NNNNN.obj, vertices.npy (load cache),
ref_rest.obj and ref_half.obj (reference poses for hierarchy building),
and the rig that generated it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import WeakPerspectiveCamera, project
from .mesh import Topology, TriMesh, load_obj, parse_obj, save_obj, serialize_obj
from .morphable.pca import pca_fit, pca_synthesize
from .morphable.procrustes import generalized_procrustes, rms_radius
from .morphable.sampling import build_pose_cluster_book, sample_pose
from .morphable.skinning import PoseParams, lbs_vertices
from .rig import ArticulatedRig, random_pose_corpus, random_registrations, save_rig

DATASET_FORMAT_VERSION = 1
DEFAULT_SPLITS = (0.87, 0.065, 0.065)
SPLIT_NAMES = ("train", "val", "test")


@dataclass
class Dataset:
    """An on-disk dataset pulled into memory."""

    root: Path
    topology: Topology
    vertices: np.ndarray  # (N, n, 3) canonical posed meshes
    records: list[dict]
    splits: dict[str, list[int]]
    meta: dict

    @property
    def num_samples(self) -> int:
        return len(self.records)

    @property
    def num_keypoints(self) -> int:
        return int(self.meta["num_keypoints"])

    @property
    def image_size(self) -> int:
        return int(self.meta["image_size"])

    def indices(self, split: str) -> list[int]:
        if split not in self.splits:
            raise KeyError(f"unknown split {split!r}; have {sorted(self.splits)}")
        return self.splits[split]

    def split_vertices(self, split: str) -> np.ndarray:
        return self.vertices[self.indices(split)]

    def split_records(self, split: str) -> list[dict]:
        return [self.records[i] for i in self.indices(split)]

    def mesh(self, index: int) -> TriMesh:
        return TriMesh(self.topology, self.vertices[index])

    def keypoints2d(self, index: int) -> np.ndarray:
        return np.asarray(self.records[index]["keypoints2d"], dtype=np.float64)

    def keypoints3d(self, index: int) -> np.ndarray:
        return np.asarray(self.records[index]["keypoints3d"], dtype=np.float64)

    def visibility(self, index: int) -> np.ndarray:
        return np.asarray(self.records[index]["visibility"], dtype=np.float64)

    def camera(self, index: int) -> WeakPerspectiveCamera:
        return WeakPerspectiveCamera.from_dict(self.records[index]["camera"])

    def reference_mesh(self, name: str = "rest") -> TriMesh:
        return load_obj(self.root / f"ref_{name}.obj")


def _pose_to_dict(pose: PoseParams) -> dict:
    return {
        "angles": pose.angles.tolist(),
        "scale": float(pose.scale),
        "rot": [float(v) for v in pose.rotation],
        "t": [float(v) for v in pose.translation],
    }


def pose_from_dict(data: dict) -> PoseParams:
    return PoseParams(
        angles=np.asarray(data["angles"], dtype=np.float64),
        scale=float(data["scale"]),
        rotation=np.asarray(data["rot"], dtype=np.float64),
        translation=np.asarray(data["t"], dtype=np.float64),
    )


def _split_assignment(count: int, ratios, seed: int) -> dict[str, list[int]]:
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("splits must be three ratios summing to 1")
    order = np.random.default_rng(seed).permutation(count)
    num_val = int(round(ratios[1] * count))
    num_test = int(round(ratios[2] * count))
    val = sorted(int(i) for i in order[:num_val])
    test = sorted(int(i) for i in order[num_val : num_val + num_test])
    train = sorted(int(i) for i in order[num_val + num_test :])
    return {"train": train, "val": val, "test": test}


def _sample_camera(rng, points: np.ndarray, image_size: int) -> WeakPerspectiveCamera:
    # frame the object: scale so the mesh spans roughly half the image
    base = 0.22 * image_size / max(rms_radius(points), 1e-9)
    scale = base * float(np.exp(rng.uniform(-0.2, 0.2)))
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    rotvec = axis * rng.uniform(0.0, np.pi)
    center = image_size / 2.0
    translation = center + rng.uniform(-0.05, 0.05, size=2) * image_size
    return WeakPerspectiveCamera(scale=scale, rotation=rotvec, translation=translation)


def generate_dataset(
    rig: ArticulatedRig,
    count: int,
    out_dir,
    *,
    seed: int = 0,
    shape_components: int = 3,
    registrations: int = 60,
    registration_noise: float = 0.0,
    pose_clusters: int = 64,
    pose_corpus: int = 2000,
    jitter: float = 0.05,
    image_size: int = 256,
    occlusion: float = 0.0,
    splits=DEFAULT_SPLITS,
) -> Dataset:
    """Generate ``count`` samples under ``out_dir`` and return the Dataset.

    Deterministic for fixed arguments: stage RNGs and per-sample RNGs are
    derived from the seed, so reruns produce byte-identical manifests.
    """
    out = Path(out_dir)
    (out / "meshes").mkdir(parents=True, exist_ok=True)

    regs = random_registrations(
        rig,
        registrations,
        seed=int(np.random.default_rng([seed, 0]).integers(2**31)),
        noise=registration_noise,
    )
    aligned, _ = generalized_procrustes(regs)
    basis = pca_fit(aligned, shape_components)

    corpus = random_pose_corpus(
        rig, pose_corpus, seed=int(np.random.default_rng([seed, 1]).integers(2**31))
    )
    book = build_pose_cluster_book(
        corpus,
        pose_clusters,
        seed=int(np.random.default_rng([seed, 2]).integers(2**31)),
    )

    regressor = rig.joint_regressor()
    topology = rig.template.topology
    records = []
    all_vertices = np.empty((count, topology.num_vertices, 3))
    split_of = {}
    assignment = _split_assignment(
        count, splits, int(np.random.default_rng([seed, 3]).integers(2**31))
    )
    for name, ids in assignment.items():
        for i in ids:
            split_of[i] = name

    for i in range(count):
        rng = np.random.default_rng([seed, 4, i])
        pose, coeffs = sample_pose(book, basis, rng, jitter=jitter)
        rest = pca_synthesize(basis, coeffs)
        tree = rig.tree.with_rest_joints(np.asarray(regressor @ rest))
        posed = lbs_vertices(rest, tree, pose)
        posed = posed - posed.mean(axis=0)
        # quantize through the OBJ text form so the manifest, the npy
        # cache, and the mesh files all describe identical coordinates
        text = serialize_obj(TriMesh(topology, posed))
        posed = parse_obj(text).vertices
        keypoints3d = np.asarray(regressor @ posed)
        camera = _sample_camera(rng, posed, image_size)
        keypoints2d = project(camera, keypoints3d)
        visible = (
            rng.random(len(keypoints3d)) >= occlusion
            if occlusion > 0
            else np.ones(len(keypoints3d), dtype=bool)
        )
        mesh_name = f"meshes/{i:05d}.obj"
        (out / mesh_name).write_text(text)
        all_vertices[i] = posed
        records.append(
            {
                "id": i,
                "mesh": mesh_name,
                "split": split_of[i],
                "pose": _pose_to_dict(pose),
                "shape_coeffs": coeffs.tolist(),
                "keypoints3d": keypoints3d.tolist(),
                "keypoints2d": keypoints2d.tolist(),
                "visibility": [int(v) for v in visible],
                "camera": camera.to_dict(),
            }
        )

    save_obj(TriMesh(topology, basis.mean), out / "ref_rest.obj")
    half_angles = 0.5 * rig.angle_limits[..., 1]
    half_pose = PoseParams(angles=half_angles)
    half_tree = rig.tree.with_rest_joints(np.asarray(regressor @ basis.mean))
    half = lbs_vertices(basis.mean, half_tree, half_pose)
    save_obj(TriMesh(topology, half - half.mean(axis=0)), out / "ref_half.obj")
    save_rig(rig, out / "rig.json")
    np.save(out / "vertices.npy", all_vertices)

    train_verts = all_vertices[assignment["train"]]
    meta = {
        "format_version": DATASET_FORMAT_VERSION,
        "count": count,
        "seed": seed,
        "rig_name": rig.name,
        "num_vertices": topology.num_vertices,
        "num_keypoints": rig.num_joints,
        "image_size": image_size,
        "shape_components": shape_components,
        "pose_clusters": pose_clusters,
        "jitter": jitter,
        "splits": assignment,
        "per_vertex_std": float(train_verts.std(axis=0).mean()),
    }
    (out / "manifest.json").write_text(json.dumps(records, indent=1))
    (out / "meta.json").write_text(json.dumps(meta, indent=1))
    return Dataset(
        root=out,
        topology=topology,
        vertices=all_vertices,
        records=records,
        splits=assignment,
        meta=meta,
    )


def load_dataset(root) -> Dataset:
    """Load a generated dataset directory.

    vertices.npy is used when present and consistent; otherwise the mesh
    OBJ files are parsed (slower but always authoritative).
    """
    root = Path(root)
    meta = json.loads((root / "meta.json").read_text())
    if meta.get("format_version") != DATASET_FORMAT_VERSION:
        raise ValueError(f"{root}: unsupported dataset format")
    records = json.loads((root / "manifest.json").read_text())
    if not isinstance(records, list):
        raise ValueError(f"{root}: manifest must be a JSON array")
    reference = load_obj(root / "ref_rest.obj")
    topology = reference.topology
    cache = root / "vertices.npy"
    count = len(records)
    shape = (count, topology.num_vertices, 3)
    if cache.exists():
        vertices = np.load(cache)
        if vertices.shape != shape:
            raise ValueError(f"{cache}: expected {shape}, found {vertices.shape}")
    else:
        vertices = np.empty(shape)
        for rec in records:
            vertices[rec["id"]] = load_obj(root / rec["mesh"]).vertices
    splits = {name: [int(i) for i in ids] for name, ids in meta["splits"].items()}
    return Dataset(
        root=root,
        topology=topology,
        vertices=vertices,
        records=records,
        splits=splits,
        meta=meta,
    )
