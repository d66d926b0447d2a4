"""Axis-angle map, log map, and right Jacobian oracles."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from spectralmesh.rotations import (
    axis_angle_from_matrix,
    axis_angle_matrix,
    axis_angle_right_jacobian,
    rotate_points_jacobian,
    skew,
)

from conftest import rel_err


def test_skew_encodes_the_cross_product():
    rng = np.random.default_rng(0)
    v = rng.standard_normal(3)
    w = rng.standard_normal(3)
    np.testing.assert_allclose(skew(v) @ w, np.cross(v, w), atol=1e-15)


def test_quarter_turn_matrix():
    rot = axis_angle_matrix([0.0, 0.0, np.pi / 2])
    np.testing.assert_allclose(rot @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(np.linalg.det(rot), 1.0, atol=1e-14)


def test_small_angle_series_agrees_with_closed_form():
    # just above the series cutoff the two branches must agree
    v = np.array([1.0, -2.0, 0.5])
    for theta in (1e-6, 1e-5, 1e-4):
        phi = theta * v / np.linalg.norm(v)
        exact = axis_angle_matrix(phi)
        # reference via scipy-free double-angle identity: R = exp(skew(phi))
        k = skew(phi)
        series = np.eye(3) + k + k @ k / 2 + k @ k @ k / 6 + k @ k @ k @ k / 24
        np.testing.assert_allclose(exact, series, atol=1e-18)


def test_zero_vector_maps_to_identity():
    np.testing.assert_array_equal(axis_angle_matrix(np.zeros(3)), np.eye(3))
    np.testing.assert_allclose(axis_angle_right_jacobian(np.zeros(3)), np.eye(3))
    np.testing.assert_array_equal(axis_angle_from_matrix(np.eye(3)), np.zeros(3))


@settings(deadline=None, max_examples=40)
@given(
    st.lists(st.floats(-2.0, 2.0), min_size=3, max_size=3),
)
def test_log_map_inverts_exp_map(vec):
    phi = np.asarray(vec)
    theta = np.linalg.norm(phi)
    if theta > np.pi:  # log map returns the principal angle only
        phi = phi * (np.pi - 1e-3) / theta
    rot = axis_angle_matrix(phi)
    back = axis_angle_from_matrix(rot)
    np.testing.assert_allclose(back, phi, atol=1e-6)


def test_log_map_near_pi():
    for axis in (np.array([1.0, 0.0, 0.0]), np.array([0.6, -0.8, 0.0])):
        for theta in (np.pi - 1e-8, np.pi):
            phi = theta * axis
            back = axis_angle_from_matrix(axis_angle_matrix(phi))
            # the axis sign is ambiguous exactly at pi
            err = min(np.abs(back - phi).max(), np.abs(back + phi).max())
            assert err < 1e-5


def test_right_jacobian_matches_finite_differences():
    rng = np.random.default_rng(1)
    for phi in (rng.standard_normal(3), 1e-5 * rng.standard_normal(3)):
        jr = axis_angle_right_jacobian(phi)
        rot = axis_angle_matrix(phi)
        step = 1e-6
        fd = np.empty((3, 3))
        for i in range(3):
            d = np.zeros(3)
            d[i] = step
            # R(phi + d) ~ R(phi) R(Jr d): recover Jr column via the log map
            local = rot.T @ axis_angle_matrix(phi + d)
            fd[:, i] = axis_angle_from_matrix(local) / step
        assert rel_err(jr, fd) < 1e-4


def test_rotate_points_jacobian_matches_finite_differences():
    rng = np.random.default_rng(2)
    phi = rng.standard_normal(3)
    points = rng.standard_normal((4, 3))
    jac = rotate_points_jacobian(phi, points)
    step = 1e-6
    for i in range(3):
        d = np.zeros(3)
        d[i] = step
        hi = points @ axis_angle_matrix(phi + d).T
        lo = points @ axis_angle_matrix(phi - d).T
        fd = (hi - lo) / (2 * step)
        assert rel_err(jac[:, :, i], fd) < 1e-4
