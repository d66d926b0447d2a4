"""Shipped articulated rigs: the ground-truth generators behind datasets.

A rig bundles a template mesh, a kinematic tree whose leaves include
zero-DOF tip joints, one keypoint ring per tree joint, per-axis angle
limits for plausible poses, and smooth displacement fields that create
shape variation for the statistical model to recover.

Every vertex of a keypoint ring carries the same skinning-weight row, so
the ring average of a skinned mesh lands exactly on the forward-kinematics
joint; keypoints extracted from generated meshes and keypoints predicted
from fitted parameters therefore agree at ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mesh import (
    JointSpec,
    TriMesh,
    joint_positions,
    load_obj,
    ring_average_matrix,
    save_obj,
)
from .morphable.skinning import KinematicTree
from .primitives import slab_from_mask, tube_mesh
from .rotations import axis_angle_matrix

RIG_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ArticulatedRig:
    """Template mesh, kinematic tree, keypoint rings, limits, shape fields."""

    name: str
    template: TriMesh
    tree: KinematicTree
    joint_specs: tuple[JointSpec, ...]
    articulated: np.ndarray  # (J,) bool, joints whose angles are sampled
    angle_limits: np.ndarray  # (J, 3, 2) low/high radians, low = high = 0 if dead
    shape_fields: np.ndarray  # (K0, n, 3) displacement fields

    def __post_init__(self):
        J = self.tree.num_joints
        if len(self.joint_specs) != J:
            raise ValueError("need one keypoint ring per tree joint")
        articulated = np.asarray(self.articulated, dtype=bool)
        limits = np.asarray(self.angle_limits, dtype=np.float64)
        fields = np.asarray(self.shape_fields, dtype=np.float64)
        object.__setattr__(self, "articulated", articulated)
        object.__setattr__(self, "angle_limits", limits)
        object.__setattr__(self, "shape_fields", fields)
        if articulated.shape != (J,):
            raise ValueError(f"articulated mask must be ({J},)")
        if limits.shape != (J, 3, 2) or (limits[..., 0] > limits[..., 1]).any():
            raise ValueError(f"angle_limits must be ({J}, 3, 2) with low <= high")
        if fields.ndim != 3 or fields.shape[1:] != (self.template.num_vertices, 3):
            raise ValueError("shape fields must be (K0, n, 3) over template vertices")
        rest = joint_positions(self.template, list(self.joint_specs))
        if not np.allclose(rest, self.tree.rest_joints, atol=1e-9):
            raise ValueError("tree rest joints must equal template ring averages")

    @property
    def num_joints(self) -> int:
        return self.tree.num_joints

    @property
    def num_shape_fields(self) -> int:
        return len(self.shape_fields)

    def joint_regressor(self):
        """Sparse (J, n) ring-average matrix mapping vertices to keypoints."""
        return ring_average_matrix(self.template.num_vertices, list(self.joint_specs))

    def tree_for(self, vertices) -> KinematicTree:
        """Tree with rest joints regressed from an alternative rest shape."""
        if isinstance(vertices, TriMesh):
            vertices = vertices.vertices
        rest = np.asarray(self.joint_regressor() @ np.asarray(vertices, dtype=np.float64))
        return self.tree.with_rest_joints(rest)


def _chain_weights(heights, pivots, band) -> np.ndarray:
    """Bone weights along a 1-D chain, (n, len(pivots)) rows summing to 1.

    Bone j owns heights between pivots j and j+1; ownership hands over
    linearly across [pivot - band, pivot + band], hitting exactly 0.5 at
    the pivot. Identical heights always get identical rows.
    """
    heights = np.asarray(heights, dtype=np.float64)
    num_bones = len(pivots)
    steps = np.ones((len(heights), num_bones))
    for j in range(1, num_bones):
        steps[:, j] = np.clip((heights - pivots[j] + band) / (2.0 * band), 0.0, 1.0)
    weights = np.empty_like(steps)
    weights[:, :-1] = steps[:, :-1] - steps[:, 1:]
    weights[:, -1] = steps[:, -1]
    return weights


def tube_rig(segments: int = 16, rings: int = 40) -> ArticulatedRig:
    """Single articulated tube: 4 chain joints plus a tip, 642 vertices.

    Joints sit on rings 0, 10, 20, 30 with the tip at the far cap; joints
    1-3 articulate (bend about x and z, no twist). Three shape fields vary
    bulge, length, and taper.
    """
    template = tube_mesh(segments=segments, rings=rings)
    verts = template.vertices
    n = len(verts)
    length = float(verts[:, 1].max())
    joint_rings = [0, rings // 4, rings // 2, 3 * rings // 4]
    pivots = [r * length / (rings - 1) for r in joint_rings]

    bottom_center = segments * rings
    top_center = bottom_center + 1
    specs = []
    for k, r in enumerate(joint_rings):
        ids = list(range(r * segments, (r + 1) * segments))
        if r == 0:
            ids.append(bottom_center)
        specs.append(JointSpec(joint_id=k, ring=tuple(ids)))
    tip_ids = list(range((rings - 1) * segments, rings * segments)) + [top_center]
    specs.append(JointSpec(joint_id=4, ring=tuple(tip_ids)))

    band = 1.5 * length / (rings - 1)
    bone_weights = _chain_weights(verts[:, 1], pivots, band)
    weights = np.zeros((n, 5))
    weights[:, :4] = bone_weights  # tip joint binds nothing

    parents = np.array([-1, 0, 1, 2, 3])
    rest = joint_positions(template, specs)
    tree = KinematicTree(parents=parents, rest_joints=rest, weights=weights)

    articulated = np.array([False, True, True, True, False])
    limits = np.zeros((5, 3, 2))
    for j in (1, 2, 3):
        limits[j, 0] = (-0.6, 0.6)  # bend about x
        limits[j, 2] = (-0.6, 0.6)  # bend about z

    # displacement fields: radial bulge, axial stretch, taper
    radial = verts.copy()
    radial[:, 1] = 0.0
    norms = np.linalg.norm(radial, axis=1, keepdims=True)
    radial = np.where(norms > 1e-12, radial / np.where(norms > 0, norms, 1.0), 0.0)
    t = verts[:, 1] / length
    fields = np.stack(
        [
            radial * (0.15 * np.sin(np.pi * t))[:, None],
            np.stack([np.zeros(n), 0.8 * t, np.zeros(n)], axis=1),
            radial * (0.12 * t)[:, None],
        ]
    )
    return ArticulatedRig(
        name="tube",
        template=template,
        tree=tree,
        joint_specs=tuple(specs),
        articulated=articulated,
        angle_limits=limits,
        shape_fields=fields,
    )


_FINGER_LENGTHS = (3, 4, 5, 4, 3)  # cells beyond the palm, one finger per gap column
_PALM_ROWS = 3


def _hand_mask() -> np.ndarray:
    nx = 2 * len(_FINGER_LENGTHS) - 1
    ny = _PALM_ROWS + max(_FINGER_LENGTHS)
    mask = np.zeros((nx, ny), dtype=bool)
    mask[:, :_PALM_ROWS] = True
    for finger, length in enumerate(_FINGER_LENGTHS):
        mask[2 * finger, _PALM_ROWS : _PALM_ROWS + length] = True
    return mask


def hand_rig(cell: float = 1.0, thickness: float = 0.6) -> ArticulatedRig:
    """Low-poly five-chain hand: wrist + 15 finger joints + 5 tips.

    Built by extruding a blocky hand silhouette; each finger is a chain of
    three articulated joints (knuckle row and two evenly spaced rows) whose
    keypoint ring is the four slab vertices of that node row. Curl is a
    rotation about +x; knuckles also spread about z.
    """
    mask = _hand_mask()
    template, node_grid = slab_from_mask(mask, cell=cell, thickness=thickness)
    verts = template.vertices
    n = len(verts)
    nx = mask.shape[0]

    def node_row_ids(finger: int, row: int) -> list[int]:
        cols = (2 * finger, 2 * finger + 1)
        ids = [
            int(node_grid[c, row, layer])
            for c in cols
            for layer in (0, 1)
            if node_grid[c, row, layer] >= 0
        ]
        if len(ids) != 4:
            raise AssertionError(f"finger {finger} row {row} is not a 4-vertex ring")
        return ids

    wrist_ring = [
        int(node_grid[c, 0, layer])
        for c in range(nx + 1)
        for layer in (0, 1)
        if node_grid[c, 0, layer] >= 0
    ]

    specs = [JointSpec(joint_id=0, ring=tuple(wrist_ring))]
    parents = [-1]
    finger_rows: list[list[int]] = []
    joint_id = 1
    for finger, length in enumerate(_FINGER_LENGTHS):
        rows = [
            _PALM_ROWS,
            _PALM_ROWS + max(1, int(np.ceil(length / 3))),
            _PALM_ROWS + max(2, int(np.ceil(2 * length / 3))),
        ]
        finger_rows.append(rows)
        parent = 0
        for row in rows:
            specs.append(JointSpec(joint_id=joint_id, ring=tuple(node_row_ids(finger, row))))
            parents.append(parent)
            parent = joint_id
            joint_id += 1
    tip_parents = []
    for finger, length in enumerate(_FINGER_LENGTHS):
        tip_row = _PALM_ROWS + length
        specs.append(JointSpec(joint_id=joint_id, ring=tuple(node_row_ids(finger, tip_row))))
        tip_parents.append(3 + 3 * finger)  # DIP joint of that finger
        parents.append(tip_parents[-1])
        joint_id += 1

    J = len(specs)  # 1 + 15 + 5
    rest = joint_positions(template, specs)
    weights = np.zeros((n, J))

    # assign vertices to a finger chain by x column; palm rows go to the wrist
    band = 0.5 * cell
    col = verts[:, 0] / cell
    y = verts[:, 1] / cell
    for finger, rows in enumerate(finger_rows):
        on_finger = (np.abs(col - (2 * finger + 0.5)) <= 0.6) & (
            y >= _PALM_ROWS - band - 1e-9
        )
        idx = np.where(on_finger)[0]
        pivots = [float(r) for r in rows]
        chain = _chain_weights(y[idx], [0.0] + pivots, band)
        # bone 0 of the chain is the palm side of the knuckle: the wrist
        weights[idx, 0] = chain[:, 0]
        for b in range(3):
            weights[idx, 1 + 3 * finger + b] = chain[:, 1 + b]
    unassigned = weights.sum(axis=1) < 1e-12
    weights[unassigned, 0] = 1.0

    tree = KinematicTree(
        parents=np.asarray(parents, dtype=np.int64), rest_joints=rest, weights=weights
    )

    articulated = np.zeros(J, dtype=bool)
    articulated[1:16] = True
    limits = np.zeros((J, 3, 2))
    for finger in range(5):
        knuckle = 1 + 3 * finger
        limits[knuckle, 0] = (0.0, 1.2)  # curl
        limits[knuckle, 2] = (-0.2, 0.2)  # spread
        limits[knuckle + 1, 0] = (0.0, 1.4)
        limits[knuckle + 2, 0] = (0.0, 1.4)

    center_x = verts[:, 0].mean()
    beyond_palm = np.clip(y - _PALM_ROWS, 0.0, None) * cell
    fields = np.stack(
        [
            np.stack([np.zeros(n), 0.35 * beyond_palm, np.zeros(n)], axis=1),
            np.stack([np.zeros(n), np.zeros(n), 0.5 * verts[:, 2]], axis=1),
            np.stack([0.08 * (verts[:, 0] - center_x), np.zeros(n), np.zeros(n)], axis=1),
        ]
    )
    return ArticulatedRig(
        name="hand",
        template=template,
        tree=tree,
        joint_specs=tuple(specs),
        articulated=articulated,
        angle_limits=limits,
        shape_fields=fields,
    )


def random_pose_corpus(rig: ArticulatedRig, count: int, seed: int = 0) -> np.ndarray:
    """Angles uniform within the rig's limits, (count, J, 3); dead axes 0."""
    rng = np.random.default_rng(seed)
    low = rig.angle_limits[..., 0]
    high = rig.angle_limits[..., 1]
    draws = rng.uniform(0.0, 1.0, size=(count,) + low.shape)
    return low + draws * (high - low)


def random_registrations(
    rig: ArticulatedRig,
    count: int,
    *,
    seed: int = 0,
    transform: bool = True,
    noise: float = 0.0,
) -> list[TriMesh]:
    """Synthetic rest-pose scans: template + Gaussian field mix (+ similarity).

    Field coefficients are standard normal per registration. With
    ``transform`` each scan also gets a random similarity (log-scale
    uniform in +-0.3, random rotation, unit-box translation) for the
    alignment stage to remove; ``noise`` adds isotropic vertex jitter.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        coeffs = rng.standard_normal(rig.num_shape_fields)
        verts = rig.template.vertices + np.tensordot(coeffs, rig.shape_fields, axes=1)
        if noise > 0:
            verts = verts + rng.normal(0.0, noise, size=verts.shape)
        if transform:
            scale = float(np.exp(rng.uniform(-0.3, 0.3)))
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            rot = axis_angle_matrix(axis * rng.uniform(0.0, np.pi))
            shift = rng.uniform(-1.0, 1.0, size=3)
            verts = scale * verts @ rot.T + shift
        out.append(rig.template.with_vertices(verts))
    return out


def save_rig(rig: ArticulatedRig, path) -> None:
    """Write a rig as JSON next to its template OBJ.

    Layout: joints (id, parent, rest position), skinning weights as
    (vertex, joint, weight) triples, template OBJ path, keypoint rings,
    articulation mask, angle limits, and shape fields.
    """
    path = Path(path)
    template_name = f"{rig.name}_template.obj"
    save_obj(rig.template, path.parent / template_name)
    vs, js = np.nonzero(rig.tree.weights)
    payload = {
        "format_version": RIG_FORMAT_VERSION,
        "name": rig.name,
        "template": template_name,
        "joints": [
            {
                "id": j,
                "parent": int(rig.tree.parents[j]),
                "rest": [float(v) for v in rig.tree.rest_joints[j]],
            }
            for j in range(rig.num_joints)
        ],
        "weights": [
            [int(v), int(j), float(rig.tree.weights[v, j])] for v, j in zip(vs, js)
        ],
        "rings": [list(map(int, spec.ring)) for spec in rig.joint_specs],
        "articulated": [int(a) for a in rig.articulated],
        "angle_limits": rig.angle_limits.tolist(),
        "shape_fields": rig.shape_fields.tolist(),
    }
    path.write_text(json.dumps(payload, indent=1))


def load_rig(path) -> ArticulatedRig:
    """Read a rig JSON; the template path resolves relative to the file."""
    path = Path(path)
    data = json.loads(path.read_text())
    if data.get("format_version") != RIG_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported rig format {data.get('format_version')}")
    template = load_obj(path.parent / data["template"])
    joints = sorted(data["joints"], key=lambda j: j["id"])
    J = len(joints)
    parents = np.array([j["parent"] for j in joints], dtype=np.int64)
    rest = np.array([j["rest"] for j in joints], dtype=np.float64)
    weights = np.zeros((template.num_vertices, J))
    for v, j, w in data["weights"]:
        weights[int(v), int(j)] = float(w)
    specs = tuple(
        JointSpec(joint_id=k, ring=tuple(int(v) for v in ring))
        for k, ring in enumerate(data["rings"])
    )
    return ArticulatedRig(
        name=data["name"],
        template=template,
        tree=KinematicTree(parents=parents, rest_joints=rest, weights=weights),
        joint_specs=specs,
        articulated=np.array(data["articulated"], dtype=bool),
        angle_limits=np.array(data["angle_limits"], dtype=np.float64),
        shape_fields=np.array(data["shape_fields"], dtype=np.float64),
    )
