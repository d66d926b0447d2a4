import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_connected_mesh
from spectralmesh.mesh import (
    JointSpec,
    ObjError,
    ObjIndexError,
    Topology,
    TriMesh,
    UnsupportedFaceError,
    joint_positions,
    load_joint_specs,
    parse_obj,
    ring_average_matrix,
    save_joint_specs,
    serialize_obj,
    validate,
)
from spectralmesh.primitives import icosahedron, tube_mesh

MINIMAL = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3"


def test_parse_minimal_file():
    mesh = parse_obj(MINIMAL)
    assert mesh.num_vertices == 3
    assert mesh.topology.num_faces == 1
    np.testing.assert_array_equal(mesh.topology.faces, [[0, 1, 2]])
    np.testing.assert_allclose(mesh.vertices[1], [1, 0, 0])


def test_parse_out_of_range_index_names_line():
    with pytest.raises(ObjIndexError) as exc:
        parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4")
    assert exc.value.line == 4
    assert "4" in str(exc.value)


def test_parse_quad_face_rejected():
    with pytest.raises(UnsupportedFaceError):
        parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4")


def test_parse_malformed_vertex_names_line():
    with pytest.raises(ObjError) as exc:
        parse_obj("v 0 0\nf 1 1 1")
    assert exc.value.line == 1


def test_parse_ignores_comments_normals_groups():
    text = "# header\nvn 0 0 1\no thing\n" + MINIMAL + "\nvt 0 0\n"
    mesh = parse_obj(text)
    assert mesh.num_vertices == 3


def test_roundtrip_bit_for_bit():
    mesh = parse_obj(MINIMAL)
    again = parse_obj(serialize_obj(mesh))
    assert np.array_equal(again.vertices, mesh.vertices)
    assert again.topology == mesh.topology


def test_roundtrip_survives_reserialization():
    # after one quantizing pass, serialize/parse is a fixed point
    rng = np.random.default_rng(0)
    mesh = TriMesh(Topology(4, [(0, 1, 2), (0, 2, 3)]), rng.standard_normal((4, 3)) * 37.1)
    once = parse_obj(serialize_obj(mesh))
    twice = parse_obj(serialize_obj(once))
    assert np.array_equal(once.vertices, twice.vertices)
    assert serialize_obj(once) == serialize_obj(twice)


def test_serialize_line_counts():
    text = serialize_obj(parse_obj(MINIMAL))
    lines = [line for line in text.splitlines() if line]
    assert sum(line.startswith("v ") for line in lines) == 3
    assert sum(line.startswith("f ") for line in lines) == 1


def test_serialize_reference_template_size():
    mesh = tube_mesh(segments=85, rings=93)
    assert mesh.num_vertices == 7907
    text = serialize_obj(mesh)
    assert sum(line.startswith("v ") for line in text.splitlines()) == 7907


def test_joint_positions_mean_and_identity():
    mesh = TriMesh(Topology(3, [(0, 1, 2)]), [(0, 0, 0), (2, 0, 0), (5, 1, 7)])
    joints = [JointSpec(0, (0, 1)), JointSpec(1, (2,))]
    pos = joint_positions(mesh, joints)
    np.testing.assert_allclose(pos[0], [1, 0, 0])
    np.testing.assert_allclose(pos[1], [5, 1, 7])


def test_joint_positions_similarity_equivariance():
    rng = np.random.default_rng(3)
    mesh = random_connected_mesh(rng, 20)
    joints = [JointSpec(0, (0, 3, 7)), JointSpec(1, (2, 5))]
    base = joint_positions(mesh, joints)

    theta = 0.7
    rot = np.array(
        [
            [np.cos(theta), -np.sin(theta), 0],
            [np.sin(theta), np.cos(theta), 0],
            [0, 0, 1],
        ]
    )
    s, t = 2.5, np.array([1.0, -2.0, 0.5])
    moved = mesh.with_vertices(s * mesh.vertices @ rot.T + t)
    expected = s * base @ rot.T + t
    got = joint_positions(moved, joints)
    assert np.abs(got - expected).max() / np.abs(expected).max() < 1e-12


def test_joint_positions_empty_ring_rejected():
    mesh = parse_obj(MINIMAL)
    with pytest.raises(ValueError):
        joint_positions(mesh, [JointSpec(0, ())])


def test_ring_average_matrix_matches_joint_positions():
    rng = np.random.default_rng(8)
    mesh = random_connected_mesh(rng, 15)
    joints = [JointSpec(0, (1, 2, 3)), JointSpec(1, (0, 14))]
    mat = ring_average_matrix(mesh.num_vertices, joints)
    np.testing.assert_allclose(mat @ mesh.vertices, joint_positions(mesh, joints))
    np.testing.assert_allclose(np.asarray(mat.sum(axis=1)).ravel(), 1.0)


def test_validate_icosahedron_clean():
    assert validate(icosahedron().topology) == []


def test_validate_flags_degenerate_face():
    bad = Topology(3, [(0, 0, 1)])
    rules = [v.rule for v in validate(bad)]
    assert rules == ["degenerate-face"]


def test_validate_flags_out_of_range_face():
    bad = Topology(3, [(0, 1, 3)])
    violations = validate(bad)
    assert [v.rule for v in violations] == ["index-range"]
    assert "3" in violations[0].message


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=4, max_value=40), st.integers(min_value=0, max_value=2**31 - 1))
def test_ring_symmetry(n, seed):
    mesh = random_connected_mesh(np.random.default_rng(seed), n)
    rings = mesh.topology.vertex_rings()
    for i, ring in enumerate(rings):
        for j in ring:
            assert i in rings[j]


def test_joint_specs_roundtrip(tmp_path):
    joints = [JointSpec(0, (0, 1, 2)), JointSpec(3, (9,))]
    path = tmp_path / "joints.json"
    save_joint_specs(joints, path)
    assert load_joint_specs(path) == joints


def test_trimesh_rejects_bad_shapes():
    topo = Topology(3, [(0, 1, 2)])
    with pytest.raises(ValueError):
        TriMesh(topo, [(0, 0), (1, 1), (2, 2)])
    with pytest.raises(ValueError):
        TriMesh(topo, np.zeros((4, 3)))
    with pytest.raises(ValueError):
        TriMesh(topo, [(0, 0, np.nan), (0, 0, 0), (0, 0, 0)])
