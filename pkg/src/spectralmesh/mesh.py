"""Triangle meshes over a fixed shared topology, OBJ I/O, and joint rings.

A Topology owns the face table and the derived adjacency (edges, vertex
rings); TriMesh pairs a topology with one vertex array. All vertex data is
float64 and all operations are pure.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ObjError(ValueError):
    """Malformed OBJ input. Carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedFaceError(ObjError):
    """Face record with a vertex count other than three."""


class ObjIndexError(ObjError):
    """Face record referencing a vertex index outside 1..num_vertices."""


@dataclass(frozen=True)
class Violation:
    """One failed topology rule, naming the rule and the offending element."""

    rule: str
    element: int
    message: str


@dataclass(frozen=True)
class JointSpec:
    """A joint located at the mean of a ring of surface vertices."""

    joint_id: int
    ring: tuple[int, ...]


class Topology:
    """Immutable face connectivity shared by a family of meshes.

    Edges and vertex rings are derived lazily from the face table and
    cached. Construction performs only shape checks; use :func:`validate`
    to collect rule violations on untrusted input.
    """

    def __init__(self, num_vertices: int, faces):
        faces = np.array(faces, dtype=np.int64, copy=True)
        if faces.size == 0:
            faces = faces.reshape(0, 3)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValueError(f"faces must be (m, 3), got {faces.shape}")
        self.num_vertices = int(num_vertices)
        self.faces = np.ascontiguousarray(faces)
        self.faces.setflags(write=False)
        self._edges: np.ndarray | None = None
        self._rings: list[np.ndarray] | None = None

    @property
    def num_faces(self) -> int:
        return self.faces.shape[0]

    @property
    def edges(self) -> np.ndarray:
        """Undirected edges as a sorted (e, 2) array with row[0] < row[1]."""
        if self._edges is None:
            f = self.faces
            pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
            pairs = np.sort(pairs, axis=1)
            edges = np.unique(pairs, axis=0) if len(pairs) else pairs
            edges.setflags(write=False)
            self._edges = edges
        return self._edges

    def vertex_rings(self) -> list[np.ndarray]:
        """Sorted neighbor lists; ring(i) = {j : (i, j) is an edge}."""
        if self._rings is None:
            neighbors: list[list[int]] = [[] for _ in range(self.num_vertices)]
            for a, b in self.edges:
                neighbors[a].append(b)
                neighbors[b].append(a)
            self._rings = [np.array(sorted(ns), dtype=np.int64) for ns in neighbors]
        return self._rings

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Topology)
            and self.num_vertices == other.num_vertices
            and self.faces.shape == other.faces.shape
            and bool(np.array_equal(self.faces, other.faces))
        )

    def __hash__(self):
        return hash((self.num_vertices, self.faces.tobytes()))

    def __repr__(self):
        return f"Topology(num_vertices={self.num_vertices}, num_faces={self.num_faces})"


def validate(topology: Topology) -> list[Violation]:
    """Check topology rules; empty list means the structure is sound.

    Rules checked per face: ``index-range`` (all indices within
    0..num_vertices-1) and ``degenerate-face`` (three distinct indices).
    Edge symmetry and ring consistency hold by construction since both are
    derived from the face table.
    """
    violations = []
    n = topology.num_vertices
    for fi, face in enumerate(topology.faces):
        if (face < 0).any() or (face >= n).any():
            violations.append(
                Violation(
                    rule="index-range",
                    element=fi,
                    message=f"face {fi} references {face.tolist()} outside 0..{n - 1}",
                )
            )
            continue
        if len({int(face[0]), int(face[1]), int(face[2])}) != 3:
            violations.append(
                Violation(
                    rule="degenerate-face",
                    element=fi,
                    message=f"face {fi} repeats a vertex: {face.tolist()}",
                )
            )
    return violations


class TriMesh:
    """One vertex configuration over a shared topology.

    Vertices are copied on construction (float64, shape (n, 3)) so every
    TriMesh owns its data independently.
    """

    def __init__(self, topology: Topology, vertices):
        vertices = np.array(vertices, dtype=np.float64, copy=True)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ValueError(f"vertices must be (n, 3), got {vertices.shape}")
        if vertices.shape[0] != topology.num_vertices:
            raise ValueError(
                f"vertex count {vertices.shape[0]} does not match topology "
                f"({topology.num_vertices})"
            )
        if not np.isfinite(vertices).all():
            raise ValueError("vertices contain non-finite values")
        self.topology = topology
        self.vertices = np.ascontiguousarray(vertices)

    @property
    def num_vertices(self) -> int:
        return self.topology.num_vertices

    def with_vertices(self, vertices) -> "TriMesh":
        return TriMesh(self.topology, vertices)

    def __repr__(self):
        return f"TriMesh({self.num_vertices} vertices, {self.topology.num_faces} faces)"


def _face_index(token: str, line_no: int, record: str) -> int:
    # OBJ face tokens may carry /texture/normal suffixes; the vertex index
    # is the part before the first slash.
    head = token.split("/", 1)[0]
    try:
        idx = int(head)
    except ValueError:
        raise ObjError(f"bad face index {token!r} in {record!r}", line_no) from None
    if idx <= 0:
        raise ObjIndexError(f"face index {idx} is not 1-based", line_no)
    return idx


def parse_obj(source) -> TriMesh:
    """Parse the v/f subset of Wavefront OBJ into a TriMesh.

    Accepts a string or a text stream. Normals, texture coordinates,
    materials, groups, and comments are ignored. Raises :class:`ObjError`
    (or a subclass) naming the 1-based line on malformed records,
    non-triangular faces, and out-of-range indices.
    """
    if isinstance(source, (str, bytes)):
        text = source.decode() if isinstance(source, bytes) else source
        lines = io.StringIO(text)
    else:
        lines = source

    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    face_lines: list[int] = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        keyword = tokens[0]
        if keyword == "v":
            if len(tokens) != 4:
                raise ObjError(f"vertex record needs 3 coordinates: {line!r}", line_no)
            try:
                vertices.append((float(tokens[1]), float(tokens[2]), float(tokens[3])))
            except ValueError:
                raise ObjError(f"bad vertex coordinate in {line!r}", line_no) from None
        elif keyword == "f":
            refs = tokens[1:]
            if len(refs) != 3:
                raise UnsupportedFaceError(
                    f"face has {len(refs)} vertices, only triangles are supported",
                    line_no,
                )
            faces.append(tuple(_face_index(t, line_no, line) for t in refs))
            face_lines.append(line_no)
        # anything else (vn, vt, usemtl, o, g, s, ...) is ignored

    n = len(vertices)
    for (a, b, c), line_no in zip(faces, face_lines):
        for idx in (a, b, c):
            if idx > n:
                raise ObjIndexError(
                    f"face index {idx} exceeds vertex count {n}", line_no
                )

    vert_array = np.array(vertices, dtype=np.float64).reshape(n, 3)
    face_array = np.array(faces, dtype=np.int64).reshape(len(faces), 3) - 1
    return TriMesh(Topology(n, face_array), vert_array)


def serialize_obj(mesh: TriMesh) -> str:
    """Serialize to the OBJ v/f subset with 9 significant digits.

    Nine digits round-trip any coordinate that was itself parsed from at
    most nine significant decimal digits, so serialize(parse(t)) reparses
    bit-for-bit for files we emitted.
    """
    parts = []
    for x, y, z in mesh.vertices:
        parts.append(f"v {x:.9g} {y:.9g} {z:.9g}")
    for a, b, c in mesh.topology.faces:
        parts.append(f"f {a + 1} {b + 1} {c + 1}")
    parts.append("")
    return "\n".join(parts)


def save_obj(mesh: TriMesh, path) -> None:
    Path(path).write_text(serialize_obj(mesh))


def load_obj(path) -> TriMesh:
    with open(path, "r") as fh:
        return parse_obj(fh)


def joint_positions(mesh: TriMesh, joints: list[JointSpec]) -> np.ndarray:
    """Joint locations as the mean of each spec's ring vertices, (J, 3).

    Equivariant under any affine map of the vertices, in particular under
    similarity transforms.
    """
    out = np.empty((len(joints), 3), dtype=np.float64)
    n = mesh.num_vertices
    for k, spec in enumerate(joints):
        ring = np.asarray(spec.ring, dtype=np.int64)
        if ring.size == 0:
            raise ValueError(f"joint {spec.joint_id} has an empty ring")
        if (ring < 0).any() or (ring >= n).any():
            raise ValueError(f"joint {spec.joint_id} ring indices out of range")
        out[k] = mesh.vertices[ring].mean(axis=0)
    return out


def ring_average_matrix(num_vertices: int, joints: list[JointSpec]):
    """Sparse (J, n) matrix M with M @ vertices == joint_positions."""
    from scipy import sparse

    rows, cols, vals = [], [], []
    for k, spec in enumerate(joints):
        ring = list(spec.ring)
        w = 1.0 / len(ring)
        for v in ring:
            rows.append(k)
            cols.append(v)
            vals.append(w)
    return sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(joints), num_vertices), dtype=np.float64
    )


def save_joint_specs(joints: list[JointSpec], path) -> None:
    records = [{"joint_id": j.joint_id, "ring": list(j.ring)} for j in joints]
    Path(path).write_text(json.dumps(records, indent=1, sort_keys=True))


def load_joint_specs(path) -> list[JointSpec]:
    records = json.loads(Path(path).read_text())
    if not isinstance(records, list):
        raise ValueError(f"{path}: joint spec file must be a JSON array")
    out = []
    for rec in records:
        out.append(JointSpec(joint_id=int(rec["joint_id"]), ring=tuple(int(v) for v in rec["ring"])))
    return out
