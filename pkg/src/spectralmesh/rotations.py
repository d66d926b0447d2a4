"""Axis-angle rotation helpers shared by the camera and skinning code.

A rotation vector encodes axis * angle (radians). Small angles switch to
series expansions so matrices and Jacobians stay accurate through zero.
"""

from __future__ import annotations

import numpy as np

_SMALL_ANGLE = 1e-7


def skew(v) -> np.ndarray:
    """Cross-product matrix [v]x with [v]x @ w = v x w."""
    x, y, z = np.asarray(v, dtype=np.float64)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def axis_angle_matrix(rotvec) -> np.ndarray:
    """Rodrigues rotation matrix for an axis-angle vector."""
    phi = np.asarray(rotvec, dtype=np.float64)
    theta2 = float(phi @ phi)
    theta = np.sqrt(theta2)
    k = skew(phi)
    if theta < _SMALL_ANGLE:
        sin_c = 1.0 - theta2 / 6.0
        cos_c = 0.5 - theta2 / 24.0
    else:
        sin_c = np.sin(theta) / theta
        cos_c = (1.0 - np.cos(theta)) / theta2
    return np.eye(3) + sin_c * k + cos_c * (k @ k)


def axis_angle_right_jacobian(rotvec) -> np.ndarray:
    """Right Jacobian J_r of the exponential map.

    Relates parameter perturbations to body-frame rotations:
    R(phi + d) = R(phi) @ R(J_r(phi) @ d) to first order, so for a point p,
    d(R p)/d phi = -R @ [p]x @ J_r(phi).
    """
    phi = np.asarray(rotvec, dtype=np.float64)
    theta2 = float(phi @ phi)
    theta = np.sqrt(theta2)
    k = skew(phi)
    if theta < _SMALL_ANGLE:
        a = 0.5 - theta2 / 24.0
        b = 1.0 / 6.0 - theta2 / 120.0
    else:
        a = (1.0 - np.cos(theta)) / theta2
        b = (theta - np.sin(theta)) / (theta2 * theta)
    return np.eye(3) - a * k + b * (k @ k)


def axis_angle_from_matrix(rot) -> np.ndarray:
    """Log map: rotation matrix to axis-angle vector, angle in [0, pi]."""
    rot = np.asarray(rot, dtype=np.float64)
    cos_theta = np.clip((np.trace(rot) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    vee = 0.5 * np.array(
        [rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]]
    )
    if theta < _SMALL_ANGLE:
        return vee
    if np.pi - theta < 1e-6:
        # sin(theta) ~ 0: recover the axis from the symmetric part
        sym = (rot + np.eye(3)) / 2.0
        axis = np.sqrt(np.clip(np.diag(sym), 0.0, None))
        major = int(axis.argmax())
        signs = np.where(sym[major] < 0, -1.0, 1.0)
        signs[major] = 1.0
        axis = axis * signs
        return theta * axis / np.linalg.norm(axis)
    return theta / np.sin(theta) * vee


def rotate_points_jacobian(rotvec, points) -> np.ndarray:
    """d(R @ p_i)/d rotvec for each point, shape (m, 3, 3)."""
    rot = axis_angle_matrix(rotvec)
    jr = axis_angle_right_jacobian(rotvec)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    out = np.empty((len(points), 3, 3))
    for i, p in enumerate(points):
        out[i] = -rot @ skew(p) @ jr
    return out
