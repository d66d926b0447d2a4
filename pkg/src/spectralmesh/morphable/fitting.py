"""Trust-region dogleg least squares and keypoint-driven model fitting.

The generic solver blends Gauss-Newton and steepest-descent steps inside
a trust radius driven by the gain ratio (shrink x0.25 below 0.25, grow x2
above 0.75); steps are accepted only when they reduce the cost, so the
residual over accepted iterates never increases. The fitting wrapper
optimizes joint angles, shape coefficients, and view parameters against
observed keypoints, 3-D directly or 2-D through a weak-perspective camera.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..camera import WeakPerspectiveCamera, fit_camera, project
from ..rotations import axis_angle_from_matrix, axis_angle_matrix
from .pca import ShapeBasis, pca_synthesize
from .procrustes import RankError, procrustes_similarity
from .skinning import KinematicTree, PoseParams, pose_joint_positions


@dataclass
class DoglegResult:
    """Solver outcome; cost_history holds 0.5*||r||^2 of accepted iterates."""

    x: np.ndarray
    residual_norm: float
    gradient_norm: float
    iterations: int
    status: str  # "gtol" | "xtol" | "maxiter"
    cost_history: list[float] = field(default_factory=list)


def numeric_jacobian(fn, x, base=None) -> np.ndarray:
    """Forward-difference Jacobian of fn at x, step scaled per coordinate."""
    x = np.asarray(x, dtype=np.float64)
    if base is None:
        base = np.asarray(fn(x), dtype=np.float64)
    out = np.empty((base.size, x.size))
    root_eps = np.sqrt(np.finfo(np.float64).eps)
    for i in range(x.size):
        probe = x.copy()
        probe[i] += root_eps * max(1.0, abs(x[i]))
        step = probe[i] - x[i]  # representable step, not the nominal one
        out[:, i] = (np.asarray(fn(probe), dtype=np.float64) - base) / step
    return out


def _dogleg_step(jac, res, grad, radius):
    gauss_newton = -np.linalg.lstsq(jac, res, rcond=None)[0]
    if np.linalg.norm(gauss_newton) <= radius:
        return gauss_newton
    jg = jac @ grad
    curvature = float(jg @ jg)
    if curvature <= 0:
        return -(radius / np.linalg.norm(grad)) * grad
    cauchy = -(float(grad @ grad) / curvature) * grad
    cauchy_norm = float(np.linalg.norm(cauchy))
    if cauchy_norm >= radius:
        return cauchy * (radius / cauchy_norm)
    # walk the dogleg segment from the Cauchy point to the boundary
    leg = gauss_newton - cauchy
    a = float(leg @ leg)
    if a == 0:
        return cauchy
    b = 2.0 * float(cauchy @ leg)
    c = cauchy_norm**2 - radius**2
    tau = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
    return cauchy + tau * leg


def dogleg_least_squares(
    residual,
    x0,
    jac=None,
    *,
    max_iter: int = 200,
    gtol: float = 1e-8,
    xtol: float = 1e-10,
    initial_radius: float = 1.0,
    max_radius: float = 1e6,
) -> DoglegResult:
    """Minimize 0.5*||residual(x)||^2 with the dogleg trust-region method.

    jac(x) -> (m, n) may be supplied; otherwise forward differences are
    used. Stops when the gradient max-norm falls below gtol, a proposed
    step is shorter than xtol, or max_iter trial steps have been taken.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    r = np.asarray(residual(x), dtype=np.float64)
    cost = 0.5 * float(r @ r)
    history = [cost]
    radius = float(initial_radius)
    status = "maxiter"
    grad_norm = np.inf
    iterations = 0
    while iterations < max_iter:
        j = np.asarray(jac(x)) if jac is not None else numeric_jacobian(residual, x, r)
        grad = j.T @ r
        grad_norm = float(np.abs(grad).max()) if grad.size else 0.0
        if grad_norm < gtol:
            status = "gtol"
            break
        step = _dogleg_step(j, r, grad, radius)
        step_norm = float(np.linalg.norm(step))
        if step_norm < xtol:
            status = "xtol"
            break
        iterations += 1
        trial = x + step
        r_trial = np.asarray(residual(trial), dtype=np.float64)
        cost_trial = 0.5 * float(r_trial @ r_trial)
        linear = r + j @ step
        predicted = cost - 0.5 * float(linear @ linear)
        actual = cost - cost_trial
        ratio = actual / predicted if predicted > 0 else -1.0
        if ratio < 0.25:
            radius *= 0.25
        elif ratio > 0.75:
            radius = min(2.0 * radius, max_radius)
        if actual > 0:
            x, r, cost = trial, r_trial, cost_trial
            history.append(cost)
        if radius < xtol:
            status = "xtol"
            break
    return DoglegResult(
        x=x,
        residual_norm=float(np.linalg.norm(r)),
        gradient_norm=grad_norm,
        iterations=iterations,
        status=status,
        cost_history=history,
    )


@dataclass
class KeypointFit:
    """Fitted parameters plus the raw solver result."""

    pose: PoseParams
    coeffs: np.ndarray
    camera: WeakPerspectiveCamera | None
    result: DoglegResult


def dogleg_fit(
    tree: KinematicTree,
    observations,
    *,
    basis: ShapeBasis | None = None,
    joint_regressor=None,
    initial_pose: PoseParams | None = None,
    initial_coeffs=None,
    initial_camera: WeakPerspectiveCamera | None = None,
    pose_mask=None,
    solve_pose: bool = True,
    solve_shape: bool | None = None,
    solve_view: bool = True,
    prealign: bool = True,
    max_iter: int = 200,
    gtol: float = 1e-8,
    xtol: float = 1e-10,
    initial_radius: float = 1.0,
) -> KeypointFit:
    """Fit pose, shape, and view parameters to observed keypoints.

    Observations of shape (J, 3) are matched against forward-kinematics
    joint positions under the pose's global similarity; (J, 2) observations
    are matched through a weak-perspective camera instead. Shape enters by
    regressing rest joints from the synthesized rest vertices, so solving
    shape requires both a basis and a joint_regressor (a (J, n) averaging
    matrix). pose_mask, a (J, 3) boolean array, restricts which angle
    entries are free; view parameters use log-scale internally so all
    solver variables are unconstrained.

    When prealign is set, the view initialization comes from a closed-form
    fit at the initial pose: a similarity Procrustes for 3-D observations,
    the rotation-free camera fit for 2-D.
    """
    observations = np.atleast_2d(np.asarray(observations, dtype=np.float64))
    num_joints = tree.num_joints
    if observations.shape[0] != num_joints or observations.shape[1] not in (2, 3):
        raise ValueError(f"observations must be ({num_joints}, 2 or 3)")
    use_camera = observations.shape[1] == 2

    if solve_shape is None:
        solve_shape = basis is not None and joint_regressor is not None
    if solve_shape and (basis is None or joint_regressor is None):
        raise ValueError("solving shape requires a basis and a joint_regressor")

    init_pose = initial_pose or PoseParams(angles=np.zeros((num_joints, 3)))
    if initial_coeffs is not None:
        init_coeffs = np.asarray(initial_coeffs, dtype=np.float64)
    else:
        init_coeffs = np.zeros(basis.num_components if basis is not None else 0)
    if pose_mask is None:
        mask = np.ones((num_joints, 3), dtype=bool)
    else:
        mask = np.asarray(pose_mask, dtype=bool)
        if mask.shape != (num_joints, 3):
            raise ValueError(f"pose_mask must be ({num_joints}, 3)")

    def rest_joints_for(coeffs):
        if basis is None or joint_regressor is None or coeffs.size == 0:
            return tree.rest_joints
        return np.asarray(joint_regressor @ pca_synthesize(basis, coeffs))

    def model_joints(angles, coeffs):
        posed = tree.with_rest_joints(rest_joints_for(coeffs))
        return pose_joint_positions(posed, angles)

    init_joints = model_joints(init_pose.angles, init_coeffs)

    if use_camera:
        camera0 = initial_camera
        if camera0 is None:
            camera0 = (
                fit_camera(init_joints, observations)
                if prealign
                else WeakPerspectiveCamera()
            )
        view0 = np.concatenate(
            [[np.log(camera0.scale)], camera0.rotation, camera0.translation]
        )
    else:
        scale0, rotvec0 = init_pose.scale, init_pose.rotation
        trans0 = init_pose.translation
        if prealign:
            scale0, rot_mat, trans0, _ = procrustes_similarity(
                init_joints, observations
            )
            if scale0 <= 0:
                raise RankError("pre-alignment produced a non-positive scale")
            rotvec0 = axis_angle_from_matrix(rot_mat)
        view0 = np.concatenate([[np.log(scale0)], rotvec0, trans0])

    pieces = []
    if solve_pose:
        pieces.append(init_pose.angles[mask])
    if solve_shape:
        pieces.append(init_coeffs)
    if solve_view:
        pieces.append(view0)
    if not pieces:
        raise ValueError("nothing to solve: all parameter groups are frozen")
    x0 = np.concatenate(pieces)

    def unpack(x):
        i = 0
        angles = init_pose.angles.copy()
        if solve_pose:
            count = int(mask.sum())
            angles[mask] = x[i : i + count]
            i += count
        coeffs = init_coeffs
        if solve_shape:
            coeffs = x[i : i + init_coeffs.size]
            i += init_coeffs.size
        view = view0
        if solve_view:
            view = x[i : i + view.size]
        return angles, coeffs, view

    def residual(x):
        angles, coeffs, view = unpack(x)
        joints = model_joints(angles, coeffs)
        if use_camera:
            cam = WeakPerspectiveCamera(np.exp(view[0]), view[1:4], view[4:6])
            predicted = project(cam, joints)
        else:
            rot = axis_angle_matrix(view[1:4])
            predicted = np.exp(view[0]) * joints @ rot.T + view[4:7]
        return (predicted - observations).ravel()

    result = dogleg_least_squares(
        residual,
        x0,
        max_iter=max_iter,
        gtol=gtol,
        xtol=xtol,
        initial_radius=initial_radius,
    )
    angles, coeffs, view = unpack(result.x)
    if use_camera:
        camera = WeakPerspectiveCamera(np.exp(view[0]), view[1:4], view[4:6])
        pose = PoseParams(angles=angles)
    else:
        camera = None
        pose = PoseParams(
            angles=angles,
            scale=float(np.exp(view[0])),
            rotation=view[1:4].copy(),
            translation=view[4:7].copy(),
        )
    return KeypointFit(pose=pose, coeffs=np.asarray(coeffs), camera=camera, result=result)
