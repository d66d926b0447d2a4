"""Similarity alignment, generalized alignment, and the shape basis."""

import numpy as np
import pytest

from spectralmesh.mesh import TriMesh
from spectralmesh.morphable.pca import pca_fit, pca_project, pca_synthesize
from spectralmesh.morphable.procrustes import (
    RankError,
    apply_similarity,
    generalized_procrustes,
    procrustes_similarity,
    rms_radius,
)
from spectralmesh.primitives import icosphere
from spectralmesh.rotations import axis_angle_matrix


def _cloud(rng, n=20):
    return rng.standard_normal((n, 3))


def test_procrustes_identity():
    rng = np.random.default_rng(0)
    x = _cloud(rng)
    scale, rotation, translation, residual = procrustes_similarity(x, x)
    assert abs(scale - 1.0) < 1e-12
    np.testing.assert_allclose(rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(translation, 0.0, atol=1e-12)
    assert residual < 1e-10


def test_procrustes_recovers_constructed_similarity():
    rng = np.random.default_rng(1)
    x = _cloud(rng)
    rot_z = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    y = 2.0 * x @ rot_z.T + np.array([1.0, 0.0, 0.0])

    scale, rotation, translation, residual = procrustes_similarity(x, y)
    assert abs(scale - 2.0) < 1e-10
    np.testing.assert_allclose(rotation, rot_z, atol=1e-10)
    np.testing.assert_allclose(translation, [1.0, 0.0, 0.0], atol=1e-10)
    assert residual < 1e-10

    np.testing.assert_allclose(
        apply_similarity(x, scale, rotation, translation), y, atol=1e-10
    )


def test_procrustes_residual_invariant_to_source_rotation():
    rng = np.random.default_rng(2)
    x = _cloud(rng)
    y = x + 0.1 * rng.standard_normal(x.shape)  # imperfect target
    q = axis_angle_matrix(np.array([0.3, -1.1, 0.7]))
    *_, base = procrustes_similarity(x, y)
    *_, rotated = procrustes_similarity(x @ q.T, y)
    assert abs(base - rotated) < 1e-10


def test_procrustes_degenerate_sources_raise():
    with pytest.raises(RankError):
        procrustes_similarity(np.zeros((5, 3)), np.random.default_rng(3).standard_normal((5, 3)))
    line = np.outer(np.arange(5.0), np.array([1.0, 2.0, 0.5]))
    with pytest.raises(RankError):
        procrustes_similarity(line, line)
    with pytest.raises(RankError):
        procrustes_similarity(np.zeros((2, 3)), np.zeros((2, 3)))


def test_gpa_similarity_copies_collapse_to_one_shape():
    rng = np.random.default_rng(4)
    base = _cloud(rng)
    family = [base]
    for _ in range(4):
        rot = axis_angle_matrix(rng.standard_normal(3))
        s = float(np.exp(rng.standard_normal() * 0.5))
        t = rng.standard_normal(3)
        family.append(apply_similarity(base, s, rot, t))

    aligned, mean = generalized_procrustes(family, tol=1e-12)
    for shape in aligned:
        np.testing.assert_allclose(shape, aligned[0], atol=1e-8)
        np.testing.assert_allclose(shape.mean(axis=0), 0.0, atol=1e-9)
        assert abs(rms_radius(shape) - 1.0) < 1e-9
    np.testing.assert_allclose(mean, aligned[0], atol=1e-8)


def test_gpa_is_idempotent():
    rng = np.random.default_rng(5)
    base = _cloud(rng)
    family = [base + 0.2 * rng.standard_normal(base.shape) for _ in range(5)]
    aligned, mean = generalized_procrustes(family, tol=1e-12)
    again, mean2 = generalized_procrustes(aligned, tol=1e-12)
    for a, b in zip(aligned, again):
        np.testing.assert_allclose(a, b, atol=1e-9)
    np.testing.assert_allclose(mean, mean2, atol=1e-9)


def test_gpa_trimesh_in_trimesh_out():
    mesh = icosphere(0)
    rng = np.random.default_rng(6)
    family = [
        TriMesh(mesh.topology, mesh.vertices * float(np.exp(rng.standard_normal())))
        for _ in range(3)
    ]
    aligned, mean = generalized_procrustes(family)
    assert all(isinstance(m, TriMesh) for m in aligned)
    assert isinstance(mean, TriMesh)
    assert mean.topology == mesh.topology


def test_pca_rank_one_family():
    rng = np.random.default_rng(7)
    mean_shape = _cloud(rng, 15)
    direction = rng.standard_normal((15, 3))
    direction /= np.linalg.norm(direction)
    coeffs = rng.standard_normal(12)
    family = [mean_shape + c * direction for c in coeffs]

    basis = pca_fit(family, num_components=2)
    energy = basis.stds**2
    assert energy[0] / energy.sum() > 0.9999

    for shape in family:
        recon = pca_synthesize(basis, pca_project(basis, shape))
        np.testing.assert_allclose(recon, shape, atol=1e-8)


def test_pca_zero_coefficients_give_the_mean():
    rng = np.random.default_rng(8)
    family = [_cloud(rng, 10) for _ in range(6)]
    basis = pca_fit(family, num_components=3)
    np.testing.assert_array_equal(pca_synthesize(basis, np.zeros(3)), basis.mean)


def test_pca_full_rank_roundtrip():
    rng = np.random.default_rng(9)
    family = [_cloud(rng, 10) for _ in range(7)]
    basis = pca_fit(family, num_components=6)  # N - 1: exact reconstruction
    for shape in family:
        recon = pca_synthesize(basis, pca_project(basis, shape))
        np.testing.assert_allclose(recon, shape, atol=1e-8)


def test_pca_after_alignment_is_scale_free():
    # the same shape at different scales must land on identical coefficients
    # once alignment has normalized the family
    rng = np.random.default_rng(10)
    mean_shape = _cloud(rng, 15)
    direction = rng.standard_normal((15, 3))
    shapes = [mean_shape + c * direction for c in rng.standard_normal(6)]
    scaled = [s * float(np.exp(rng.standard_normal())) for s in shapes]

    aligned, _ = generalized_procrustes(shapes + scaled, tol=1e-12)
    basis = pca_fit(aligned, num_components=3)
    for i in range(len(shapes)):
        a = pca_project(basis, aligned[i])
        b = pca_project(basis, aligned[i + len(shapes)])
        np.testing.assert_allclose(a, b, atol=1e-6)


def test_pca_component_bounds_enforced():
    rng = np.random.default_rng(11)
    family = [_cloud(rng, 5) for _ in range(4)]
    with pytest.raises(ValueError):
        pca_fit(family, num_components=4)  # exceeds N - 1
    with pytest.raises(ValueError):
        pca_fit(family, num_components=0)
