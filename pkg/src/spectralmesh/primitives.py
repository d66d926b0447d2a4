"""Procedural triangle meshes used by the shipped rigs and the test suite."""

from __future__ import annotations

import numpy as np

from .mesh import Topology, TriMesh


def icosahedron() -> TriMesh:
    """Regular icosahedron with unit circumradius (12 vertices, 20 faces)."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return TriMesh(Topology(12, faces), verts)


def icosphere(subdivisions: int = 1) -> TriMesh:
    """Icosahedron subdivided ``subdivisions`` times, projected to the sphere.

    Vertex counts follow 10 * 4**k + 2: 12, 42, 162, 642, ...
    """
    mesh = icosahedron()
    verts = [tuple(v) for v in mesh.vertices]
    faces = [tuple(f) for f in mesh.topology.faces]
    for _ in range(subdivisions):
        midpoint_cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoint_cache:
                p = np.array(verts[a]) + np.array(verts[b])
                p /= np.linalg.norm(p)
                midpoint_cache[key] = len(verts)
                verts.append(tuple(p))
            return midpoint_cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        faces = new_faces
    verts_arr = np.array(verts, dtype=np.float64)
    faces_arr = np.array(faces, dtype=np.int64)
    return TriMesh(Topology(len(verts), faces_arr), verts_arr)


def tube_mesh(
    segments: int = 16,
    rings: int = 40,
    radius: float = 1.0,
    length: float = 8.0,
) -> TriMesh:
    """Closed capped cylinder along +y with segments * rings + 2 vertices.

    Ring r sits at height r * length / (rings - 1); the two extra vertices
    are the cap centers. segments=16, rings=40 gives the 642-vertex rig
    template; segments=85, rings=93 gives the 7907-vertex stress template.
    """
    if segments < 3 or rings < 2:
        raise ValueError("need at least 3 segments and 2 rings")
    ys = np.linspace(0.0, length, rings)
    theta = np.arange(segments) * (2.0 * np.pi / segments)
    circle = np.stack([np.cos(theta), np.zeros_like(theta), np.sin(theta)], axis=1)
    verts = np.empty((segments * rings + 2, 3), dtype=np.float64)
    for r in range(rings):
        block = circle * radius
        block[:, 1] = ys[r]
        verts[r * segments : (r + 1) * segments] = block
    bottom = segments * rings
    top = bottom + 1
    verts[bottom] = (0.0, 0.0, 0.0)
    verts[top] = (0.0, length, 0.0)

    faces = []
    for r in range(rings - 1):
        for s in range(segments):
            a = r * segments + s
            b = r * segments + (s + 1) % segments
            c = a + segments
            d = b + segments
            # outward orientation: +x cross section winds counterclockwise
            faces.append((a, c, b))
            faces.append((b, c, d))
    for s in range(segments):
        a = s
        b = (s + 1) % segments
        faces.append((bottom, b, a))
    base = (rings - 1) * segments
    for s in range(segments):
        a = base + s
        b = base + (s + 1) % segments
        faces.append((top, a, b))
    return TriMesh(Topology(len(verts), np.array(faces, dtype=np.int64)), verts)


def grid_plane(nx: int = 6, ny: int = 6, spacing: float = 1.0) -> TriMesh:
    """Flat triangulated grid in y=0; handy for planar quadric checks."""
    xs, zs = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    verts = np.stack(
        [xs.ravel() * spacing, np.zeros(nx * ny), zs.ravel() * spacing], axis=1
    ).astype(np.float64)
    faces = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a = i * ny + j
            b = a + 1
            c = a + ny
            d = c + 1
            faces.append((a, b, c))
            faces.append((b, d, c))
    return TriMesh(Topology(nx * ny, np.array(faces, dtype=np.int64)), verts)


def slab_from_mask(mask: np.ndarray, cell: float = 1.0, thickness: float = 0.6):
    """Extrude a 2-D occupancy mask into a closed two-layer slab mesh.

    mask[i, j] True places a cell with x in [i, i+1) * cell and
    y in [j, j+1) * cell. Returns (TriMesh, node_grid) where node_grid maps
    (i, j, layer) grid nodes to vertex indices (-1 where absent); layer 0 is
    the top (+z), layer 1 the bottom. The mask must be 4-connected without
    checkerboard corner contacts for the result to be manifold.
    """
    mask = np.asarray(mask, dtype=bool)
    nx, ny = mask.shape
    node_used = np.zeros((nx + 1, ny + 1), dtype=bool)
    for i in range(nx):
        for j in range(ny):
            if mask[i, j]:
                node_used[i : i + 2, j : j + 2] = True

    node_grid = -np.ones((nx + 1, ny + 1, 2), dtype=np.int64)
    verts = []
    half = thickness / 2.0
    for i in range(nx + 1):
        for j in range(ny + 1):
            if node_used[i, j]:
                for layer, z in enumerate((half, -half)):
                    node_grid[i, j, layer] = len(verts)
                    verts.append((i * cell, j * cell, z))

    faces = []

    def quad(a, b, c, d):
        faces.append((a, b, c))
        faces.append((a, c, d))

    for i in range(nx):
        for j in range(ny):
            if not mask[i, j]:
                continue
            t00, t10 = node_grid[i, j, 0], node_grid[i + 1, j, 0]
            t11, t01 = node_grid[i + 1, j + 1, 0], node_grid[i, j + 1, 0]
            b00, b10 = node_grid[i, j, 1], node_grid[i + 1, j, 1]
            b11, b01 = node_grid[i + 1, j + 1, 1], node_grid[i, j + 1, 1]
            quad(t00, t10, t11, t01)  # top, +z outward
            quad(b00, b01, b11, b10)  # bottom, -z outward

    def occupied(i, j):
        return 0 <= i < nx and 0 <= j < ny and mask[i, j]

    for i in range(nx):
        for j in range(ny):
            if not mask[i, j]:
                continue
            # side walls on boundary edges, wound so normals face outward
            if not occupied(i, j - 1):  # -y edge
                quad(
                    node_grid[i, j, 1], node_grid[i + 1, j, 1],
                    node_grid[i + 1, j, 0], node_grid[i, j, 0],
                )
            if not occupied(i, j + 1):  # +y edge
                quad(
                    node_grid[i + 1, j + 1, 1], node_grid[i, j + 1, 1],
                    node_grid[i, j + 1, 0], node_grid[i + 1, j + 1, 0],
                )
            if not occupied(i - 1, j):  # -x edge
                quad(
                    node_grid[i, j + 1, 1], node_grid[i, j, 1],
                    node_grid[i, j, 0], node_grid[i, j + 1, 0],
                )
            if not occupied(i + 1, j):  # +x edge
                quad(
                    node_grid[i + 1, j, 1], node_grid[i + 1, j + 1, 1],
                    node_grid[i + 1, j + 1, 0], node_grid[i + 1, j, 0],
                )

    mesh = TriMesh(
        Topology(len(verts), np.array(faces, dtype=np.int64)),
        np.array(verts, dtype=np.float64),
    )
    return mesh, node_grid
