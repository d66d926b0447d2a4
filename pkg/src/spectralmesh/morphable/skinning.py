"""Kinematic trees, euler rotations, and linear blend skinning.

Rotations use intrinsic XYZ euler angles: R = Rx(a) @ Ry(b) @ Rz(c), each
about the joint's running local frame. Joint transforms compose down the
tree from translated rest offsets; skinning applies the pose-relative-to-
rest transforms weighted per vertex, then a global similarity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mesh import TriMesh
from ..rotations import axis_angle_matrix


def euler_xyz_to_matrix(angles) -> np.ndarray:
    """Rotation matrix for intrinsic XYZ euler angles (radians)."""
    a, b, c = np.asarray(angles, dtype=np.float64)
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cc, sc = np.cos(c), np.sin(c)
    rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rz = np.array([[cc, -sc, 0], [sc, cc, 0], [0, 0, 1]])
    return rx @ ry @ rz


@dataclass(frozen=True)
class KinematicTree:
    """Joint hierarchy with rest positions and skinning weights.

    ``parents[j]`` is the parent joint index (-1 for the root); weights is
    (n, J), rows summing to one.
    """

    parents: np.ndarray
    rest_joints: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        parents = np.asarray(self.parents, dtype=np.int64)
        rest = np.asarray(self.rest_joints, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "rest_joints", rest)
        object.__setattr__(self, "weights", weights)
        J = len(parents)
        if rest.shape != (J, 3):
            raise ValueError(f"rest_joints must be ({J}, 3)")
        if weights.ndim != 2 or weights.shape[1] != J:
            raise ValueError(f"weights must be (n, {J})")
        if (weights < -1e-12).any():
            raise ValueError("skinning weights must be non-negative")
        sums = weights.sum(axis=1)
        if not np.allclose(sums, 1.0, atol=1e-9):
            raise ValueError("skinning weight rows must sum to 1")
        if (parents[0] != -1) or (parents[1:] <= -1).any():
            raise ValueError("joint 0 must be the root (-1); others need parents")
        # children must come after parents, which also rules out cycles
        for j in range(1, J):
            if parents[j] >= j:
                raise ValueError(
                    f"joint {j} has parent {parents[j]}; parents must precede children"
                )

    @property
    def num_joints(self) -> int:
        return len(self.parents)

    def with_rest_joints(self, rest_joints: np.ndarray) -> "KinematicTree":
        return KinematicTree(self.parents, rest_joints, self.weights)


@dataclass
class PoseParams:
    """Per-joint euler angles plus a global similarity transform."""

    angles: np.ndarray  # (J, 3) intrinsic XYZ, radians
    scale: float = 1.0
    rotation: np.ndarray = field(default_factory=lambda: np.zeros(3))  # axis-angle
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=np.float64)
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        if self.scale <= 0:
            raise ValueError("global scale must be positive")


def joint_transforms(tree: KinematicTree, angles: np.ndarray) -> np.ndarray:
    """Posed world transform per joint, (J, 4, 4).

    A_j = A_parent @ T(rest_j - rest_parent) @ R(angles_j), with the root
    translated to its rest position.
    """
    angles = np.asarray(angles, dtype=np.float64)
    J = tree.num_joints
    out = np.empty((J, 4, 4), dtype=np.float64)
    for j in range(J):
        parent = int(tree.parents[j])
        offset = (
            tree.rest_joints[j] - tree.rest_joints[parent]
            if parent >= 0
            else tree.rest_joints[j]
        )
        local = np.eye(4)
        local[:3, :3] = euler_xyz_to_matrix(angles[j])
        local[:3, 3] = offset
        out[j] = out[parent] @ local if parent >= 0 else local
    return out


def pose_joint_positions(tree: KinematicTree, angles: np.ndarray) -> np.ndarray:
    """World joint positions under a pose (rotation pivots stay in place)."""
    return joint_transforms(tree, angles)[:, :3, 3].copy()


def skinning_transforms(tree: KinematicTree, angles: np.ndarray) -> np.ndarray:
    """Pose-relative-to-rest transforms G_j = A_j @ T(-rest_j), (J, 4, 4)."""
    world = joint_transforms(tree, angles)
    out = np.empty_like(world)
    for j in range(tree.num_joints):
        back = np.eye(4)
        back[:3, 3] = -tree.rest_joints[j]
        out[j] = world[j] @ back
    return out


def lbs_vertices(
    rest_vertices: np.ndarray, tree: KinematicTree, pose: PoseParams
) -> np.ndarray:
    """Linear blend skinning of rest vertices, then the global similarity.

    v' = s R_g (sum_j w_vj G_j [v; 1]) + t_g. Zero pose with the identity
    similarity reproduces the rest vertices exactly.
    """
    rest_vertices = np.asarray(rest_vertices, dtype=np.float64)
    transforms = skinning_transforms(tree, pose.angles)
    posed = np.zeros_like(rest_vertices)
    hom = np.concatenate([rest_vertices, np.ones((len(rest_vertices), 1))], axis=1)
    for j in range(tree.num_joints):
        w = tree.weights[:, j]
        if not w.any():
            continue
        posed += w[:, None] * (hom @ transforms[j, :3, :].T)
    r_global = axis_angle_matrix(pose.rotation)
    return pose.scale * posed @ r_global.T + pose.translation


def lbs_pose(rest_mesh: TriMesh, tree: KinematicTree, pose: PoseParams) -> TriMesh:
    """Skinned TriMesh for a rest mesh, kinematic tree, and pose."""
    if len(tree.weights) != rest_mesh.num_vertices:
        raise ValueError(
            f"weights cover {len(tree.weights)} vertices, mesh has "
            f"{rest_mesh.num_vertices}"
        )
    return rest_mesh.with_vertices(lbs_vertices(rest_mesh.vertices, tree, pose))
