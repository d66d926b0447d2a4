"""Weak-perspective camera: scaled orthographic projection of 3-D points.

A camera is (scale, rotation, translation): rotate the point, drop z,
multiply by scale (pixels per model unit), add the 2-D image translation.
Pixel convention is origin top-left, +x right, +y down. Rotation is an
axis-angle vector so all six parameters are unconstrained reals apart
from scale > 0 (optimizers work with log-scale, see the encoder head).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rotations import axis_angle_matrix, rotate_points_jacobian


@dataclass
class WeakPerspectiveCamera:
    """Scale in pixels per model unit, axis-angle rotation, pixel shift."""

    scale: float = 1.0
    rotation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        if self.scale <= 0:
            raise ValueError("camera scale must be positive")
        if self.rotation.shape != (3,) or self.translation.shape != (2,):
            raise ValueError("rotation must be (3,), translation (2,)")
        if not (
            np.isfinite(self.scale)
            and np.isfinite(self.rotation).all()
            and np.isfinite(self.translation).all()
        ):
            raise ValueError("camera parameters must be finite")

    def to_dict(self) -> dict:
        return {
            "scale": float(self.scale),
            "rot": [float(v) for v in self.rotation],
            "t": [float(v) for v in self.translation],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WeakPerspectiveCamera":
        return cls(
            scale=float(data["scale"]),
            rotation=np.asarray(data["rot"], dtype=np.float64),
            translation=np.asarray(data["t"], dtype=np.float64),
        )


@dataclass
class CameraGradients:
    """Loss gradients for the three camera parameter groups."""

    scale: float
    rotation: np.ndarray  # (3,)
    translation: np.ndarray  # (2,)


def project(camera: WeakPerspectiveCamera, points) -> np.ndarray:
    """Project (m, 3) points to (m, 2) pixels: s * drop_z(R p) + t.

    Translating inputs along the camera z axis leaves the output
    unchanged; that is the weak-perspective approximation.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    rotated = points @ axis_angle_matrix(camera.rotation).T
    return camera.scale * rotated[:, :2] + camera.translation


def keypoint_loss(
    camera: WeakPerspectiveCamera,
    joints,
    observed,
    visibility=None,
) -> tuple[float, CameraGradients, np.ndarray]:
    """Mean absolute reprojection error over visible keypoint coordinates.

    loss = sum_visible |project(joints) - observed|_1 / (2 * num_visible),
    i.e. averaged over coordinates, not keypoints. Returns (loss, camera
    gradients, joint gradients (J, 3)); gradients are exact apart from the
    L1 kink, where the subgradient 0 is used. An all-invisible mask gives
    loss 0 with zero gradients.
    """
    joints = np.atleast_2d(np.asarray(joints, dtype=np.float64))
    observed = np.atleast_2d(np.asarray(observed, dtype=np.float64))
    if observed.shape != (len(joints), 2):
        raise ValueError(f"observed must be ({len(joints)}, 2)")
    if visibility is None:
        visible = np.ones(len(joints), dtype=bool)
    else:
        visible = np.asarray(visibility).astype(bool)
    num_visible = int(visible.sum())
    zero = CameraGradients(0.0, np.zeros(3), np.zeros(2))
    if num_visible == 0:
        return 0.0, zero, np.zeros_like(joints)

    rot = axis_angle_matrix(camera.rotation)
    rotated = joints @ rot.T
    projected = camera.scale * rotated[:, :2] + camera.translation
    diff = (projected - observed) * visible[:, None]
    loss = float(np.abs(diff).sum()) / (2 * num_visible)

    # d loss / d projected, with sign(0) = 0 at exact hits
    g_proj = np.sign(diff) / (2 * num_visible)
    g_scale = float((g_proj * rotated[:, :2]).sum())
    g_trans = g_proj.sum(axis=0)
    # chain through rotated points: d projected / d rotated = s on x, y
    g_rotated = np.zeros((len(joints), 3))
    g_rotated[:, :2] = camera.scale * g_proj
    drot = rotate_points_jacobian(camera.rotation, joints)  # (J, 3, 3)
    g_rotvec = np.einsum("ji,jik->k", g_rotated, drot)
    g_joints = g_rotated @ rot
    return loss, CameraGradients(g_scale, g_rotvec, g_trans), g_joints


def fit_camera(joints, observed) -> WeakPerspectiveCamera:
    """Closed-form scale and shift with rotation frozen at identity.

    Least squares of s * xy + t against the observations: s is the ratio
    of centered cross- to self-correlation, t re-centers. Serves as the
    rotation-free initializer for iterative fitting. Raises
    :class:`numpy.linalg.LinAlgError` when the model xy spread vanishes or
    the fitted scale is not positive.
    """
    joints = np.atleast_2d(np.asarray(joints, dtype=np.float64))
    observed = np.atleast_2d(np.asarray(observed, dtype=np.float64))
    if len(joints) < 3:
        raise np.linalg.LinAlgError("need at least 3 keypoints to fit a camera")
    xy = joints[:, :2]
    xy_c = xy - xy.mean(axis=0)
    obs_c = observed - observed.mean(axis=0)
    denom = float((xy_c**2).sum())
    if denom < 1e-12:
        raise np.linalg.LinAlgError("model keypoints project to a single pixel")
    scale = float((xy_c * obs_c).sum()) / denom
    if scale <= 0:
        raise np.linalg.LinAlgError("degenerate fit: non-positive scale")
    translation = observed.mean(axis=0) - scale * xy.mean(axis=0)
    return WeakPerspectiveCamera(scale=scale, translation=translation)
