"""Shipped rigs: structure, keypoint consistency, corpora, JSON roundtrip."""

import numpy as np
import pytest

from spectralmesh.mesh import validate
from spectralmesh.morphable.skinning import PoseParams, lbs_pose, pose_joint_positions
from spectralmesh.rig import (
    hand_rig,
    load_rig,
    random_pose_corpus,
    random_registrations,
    save_rig,
    tube_rig,
)


@pytest.fixture(scope="module")
def tube():
    return tube_rig()


@pytest.fixture(scope="module")
def hand():
    return hand_rig()


def test_tube_rig_structure(tube):
    assert tube.template.num_vertices == 642
    assert tube.num_joints == 5
    np.testing.assert_array_equal(tube.tree.parents, [-1, 0, 1, 2, 3])
    np.testing.assert_array_equal(tube.articulated, [False, True, True, True, False])
    assert tube.num_shape_fields == 3
    # the tip joint exists for keypoints only; nothing deforms with it
    assert not tube.tree.weights[:, 4].any()
    # articulated joints bend but never twist about the bone axis
    assert not tube.angle_limits[:, 1, :].any()


def test_hand_rig_structure(hand):
    assert hand.num_joints == 21
    articulated = np.zeros(21, dtype=bool)
    articulated[1:16] = True
    np.testing.assert_array_equal(hand.articulated, articulated)
    # five 3-joint chains hang off the wrist, each ending in a dead tip
    for finger in range(5):
        knuckle = 1 + 3 * finger
        assert hand.tree.parents[knuckle] == 0
        assert hand.tree.parents[knuckle + 1] == knuckle
        assert hand.tree.parents[16 + finger] == knuckle + 2
    assert validate(hand.template.topology) == []


def test_ring_rows_share_weights(tube, hand):
    # every keypoint ring must be carried by a single weight row, otherwise
    # ring averages of posed meshes drift off the forward-kinematics joints
    for rig in (tube, hand):
        weights = rig.tree.weights
        for spec in rig.joint_specs:
            rows = weights[list(spec.ring)]
            np.testing.assert_array_equal(rows, np.broadcast_to(rows[0], rows.shape))


@pytest.mark.parametrize("rig_build", [tube_rig, hand_rig], ids=["tube", "hand"])
def test_posed_keypoints_match_forward_kinematics(rig_build):
    rig = rig_build()
    angles = random_pose_corpus(rig, 3, seed=7)
    regressor = rig.joint_regressor()
    for pose_angles in angles:
        posed = lbs_pose(rig.template, rig.tree, PoseParams(angles=pose_angles)).vertices
        keypoints = np.asarray(regressor @ posed)
        np.testing.assert_allclose(
            keypoints, pose_joint_positions(rig.tree, pose_angles), atol=1e-9
        )


def test_zero_pose_reproduces_template(tube):
    # blended rows sum to 1 exactly, but w0*v + w1*v re-rounds, so the
    # identity holds to machine precision rather than bit-for-bit
    posed = lbs_pose(tube.template, tube.tree, PoseParams(angles=np.zeros((5, 3))))
    np.testing.assert_allclose(posed.vertices, tube.template.vertices, atol=1e-14)


def test_pose_corpus_respects_limits(tube):
    angles = random_pose_corpus(tube, 200, seed=1)
    assert angles.shape == (200, 5, 3)
    low = tube.angle_limits[..., 0]
    high = tube.angle_limits[..., 1]
    assert (angles >= low).all() and (angles <= high).all()
    # dead joints and dead axes stay exactly at zero
    assert not angles[:, 0].any() and not angles[:, 4].any()
    assert not angles[:, :, 1].any()
    np.testing.assert_array_equal(angles, random_pose_corpus(tube, 200, seed=1))


def test_random_registrations_are_field_mixes(tube):
    plain = random_registrations(tube, 4, seed=3, transform=False)
    assert len(plain) == 4
    for mesh in plain:
        assert mesh.topology is tube.template.topology
        delta = mesh.vertices - tube.template.vertices
        coeffs, res, *_ = np.linalg.lstsq(
            tube.shape_fields.reshape(3, -1).T, delta.ravel(), rcond=None
        )
        assert res[0] < 1e-18  # exactly in the span of the shape fields

    again = random_registrations(tube, 4, seed=3, transform=False)
    for a, b in zip(plain, again):
        np.testing.assert_array_equal(a.vertices, b.vertices)

    moved = random_registrations(tube, 4, seed=3, transform=True)
    assert not np.allclose(moved[0].vertices, plain[0].vertices, atol=0.05)


def test_rig_json_roundtrip(tube, tmp_path):
    path = tmp_path / "tube_rig.json"
    save_rig(tube, path)
    assert (tmp_path / "tube_template.obj").exists()
    back = load_rig(path)
    assert back.name == tube.name
    np.testing.assert_allclose(back.template.vertices, tube.template.vertices, atol=1e-8)
    np.testing.assert_array_equal(back.template.topology.faces, tube.template.topology.faces)
    np.testing.assert_array_equal(back.tree.parents, tube.tree.parents)
    np.testing.assert_array_equal(back.tree.weights, tube.tree.weights)
    np.testing.assert_array_equal(back.tree.rest_joints, tube.tree.rest_joints)
    assert tuple(s.ring for s in back.joint_specs) == tuple(s.ring for s in tube.joint_specs)
    np.testing.assert_array_equal(back.articulated, tube.articulated)
    np.testing.assert_array_equal(back.angle_limits, tube.angle_limits)
    np.testing.assert_array_equal(back.shape_fields, tube.shape_fields)


def test_load_rig_rejects_unknown_version(tube, tmp_path):
    path = tmp_path / "tube_rig.json"
    save_rig(tube, path)
    text = path.read_text().replace('"format_version": 1', '"format_version": 2', 1)
    path.write_text(text)
    with pytest.raises(ValueError, match="unsupported rig format"):
        load_rig(path)


def test_tree_for_regresses_joints_from_new_rest_shape(tube):
    doubled = tube.template.vertices * 2.0
    tree = tube.tree_for(doubled)
    np.testing.assert_allclose(tree.rest_joints, tube.tree.rest_joints * 2.0, atol=1e-12)
    np.testing.assert_array_equal(tree.weights, tube.tree.weights)


def test_rig_validation_rejects_mismatched_rest_joints(tube):
    from spectralmesh.rig import ArticulatedRig

    bad_tree = tube.tree.with_rest_joints(tube.tree.rest_joints + 0.1)
    with pytest.raises(ValueError, match="ring averages"):
        ArticulatedRig(
            name="tube",
            template=tube.template,
            tree=bad_tree,
            joint_specs=tube.joint_specs,
            articulated=tube.articulated,
            angle_limits=tube.angle_limits,
            shape_fields=tube.shape_fields,
        )
