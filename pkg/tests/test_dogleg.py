"""Trust-region solver contracts and keypoint fitting recovery."""

import numpy as np
import pytest

from spectralmesh.morphable.fitting import (
    dogleg_fit,
    dogleg_least_squares,
    numeric_jacobian,
)
from spectralmesh.morphable.skinning import KinematicTree, PoseParams, pose_joint_positions


def test_numeric_jacobian_of_a_linear_map():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((5, 3))
    b = rng.standard_normal(5)
    x = rng.standard_normal(3)
    jac = numeric_jacobian(lambda v: a @ v - b, x)
    np.testing.assert_allclose(jac, a, atol=1e-6)


def test_already_solved_problem_takes_zero_iterations():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    x_true = rng.standard_normal(4)
    result = dogleg_least_squares(lambda v: a @ (v - x_true), x_true.copy())
    assert result.iterations == 0
    assert result.status == "gtol"
    assert result.residual_norm < 1e-10
    np.testing.assert_array_equal(result.x, x_true)


def test_linear_problem_converges_in_one_accepted_step():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((6, 3))
    x_true = rng.standard_normal(3)
    x0 = x_true + 0.05 * rng.standard_normal(3)  # keep the step inside the radius

    result = dogleg_least_squares(lambda v: a @ (v - x_true), x0, jac=lambda v: a)
    assert result.iterations <= 2
    assert result.residual_norm < 1e-12
    np.testing.assert_allclose(result.x, x_true, atol=1e-10)


def test_cost_history_is_monotone_on_a_nonlinear_problem():
    def residual(v):
        x, y = v
        return np.array([10.0 * (y - x**2), 1.0 - x])

    result = dogleg_least_squares(residual, np.array([-1.2, 1.0]), max_iter=500)
    history = np.asarray(result.cost_history)
    assert (np.diff(history) <= 0).all()
    assert result.residual_norm < 1e-8
    np.testing.assert_allclose(result.x, [1.0, 1.0], atol=1e-6)


def test_max_iter_is_reported():
    def residual(v):
        x, y = v
        return np.array([10.0 * (y - x**2), 1.0 - x])

    result = dogleg_least_squares(residual, np.array([-1.2, 1.0]), max_iter=2)
    assert result.status == "maxiter"
    assert result.iterations == 2


def _bent_arm():
    # root -> elbow -> wrist, with a right-angle bend so the rest joints
    # are not collinear (a similarity pre-alignment needs full rank)
    return KinematicTree(
        parents=np.array([-1, 0, 1]),
        rest_joints=np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]]),
        weights=np.eye(3),
    )


def test_single_joint_quarter_pi_recovery_from_exact_keypoints():
    tree = _bent_arm()
    true_angle = np.pi / 6
    angles = np.zeros((3, 3))
    angles[1, 2] = true_angle
    observations = pose_joint_positions(tree, angles)

    mask = np.zeros((3, 3), dtype=bool)
    mask[1, 2] = True  # only the elbow's z angle is free
    fit = dogleg_fit(tree, observations, pose_mask=mask)

    assert abs(fit.pose.angles[1, 2] - true_angle) < 1e-4
    assert fit.result.residual_norm < 1e-6
    history = np.asarray(fit.result.cost_history)
    assert (np.diff(history) <= 0).all()
    # the global similarity stays near identity: the data is in rig frame
    assert abs(fit.pose.scale - 1.0) < 1e-4
    np.testing.assert_allclose(fit.pose.translation, 0.0, atol=1e-4)


def test_fit_through_global_similarity():
    tree = _bent_arm()
    angles = np.zeros((3, 3))
    angles[1, 2] = 0.4
    joints = pose_joint_positions(tree, angles)
    # observe the posed joints under a known similarity
    from spectralmesh.rotations import axis_angle_matrix

    rot = axis_angle_matrix(np.array([0.1, 0.2, -0.3]))
    observations = 1.7 * joints @ rot.T + np.array([0.5, -1.0, 2.0])

    mask = np.zeros((3, 3), dtype=bool)
    mask[1, 2] = True
    fit = dogleg_fit(tree, observations, pose_mask=mask)
    assert abs(fit.pose.angles[1, 2] - 0.4) < 1e-4
    assert abs(fit.pose.scale - 1.7) < 1e-4
    assert fit.result.residual_norm < 1e-6


def test_fit_rejects_bad_inputs():
    tree = _bent_arm()
    with pytest.raises(ValueError):
        dogleg_fit(tree, np.zeros((2, 3)))  # wrong joint count
    with pytest.raises(ValueError):
        dogleg_fit(
            tree,
            np.zeros((3, 3)),
            pose_mask=np.ones((2, 3), dtype=bool),
        )
    with pytest.raises(ValueError):
        dogleg_fit(tree, np.zeros((3, 3)), solve_pose=False, solve_view=False)
    with pytest.raises(ValueError):
        dogleg_fit(tree, np.zeros((3, 3)), solve_shape=True)  # no basis given
