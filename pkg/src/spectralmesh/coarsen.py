"""Quadric-error edge-collapse decimation and multi-level pooling
hierarchies.

Decimation follows the plane-quadric greedy scheme: each vertex carries the
sum of its incident face plane quadrics, collapse cost is the quadric form
evaluated at the cheaper endpoint, the survivor keeps that endpoint's
position, ties break on the lexicographically smallest edge, and any
collapse that would flip a face normal (or pinch the surface) is skipped.

A hierarchy stacks decimations: downsampling matrices select surviving
vertices, upsampling matrices are barycentric interpolation against the
nearest coarse triangle in the reference pose. Barycentric weights are
quantized to 30 fractional bits so each row sums to exactly 1.0.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from . import _kernels
from .mesh import TriMesh, Topology

_WEIGHT_SCALE = float(2**30)


class DecimationError(RuntimeError):
    """Raised when the collapse target cannot be reached."""

    def __init__(self, target: int, achieved: int):
        super().__init__(
            f"decimation stalled at {achieved} vertices before reaching {target}"
        )
        self.target = target
        self.achieved = achieved


def face_plane_quadrics(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Plane quadric p p^T per face, with p = (n_hat, -n_hat . v0)."""
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    normals = np.cross(b - a, c - a)
    lengths = np.linalg.norm(normals, axis=1)
    safe = np.where(lengths > 0, lengths, 1.0)
    normals = normals / safe[:, None]
    offsets = -(normals * a).sum(axis=1)
    planes = np.concatenate([normals, offsets[:, None]], axis=1)
    quadrics = planes[:, :, None] * planes[:, None, :]
    quadrics[lengths == 0] = 0.0
    return quadrics


def vertex_quadrics(mesh: TriMesh) -> np.ndarray:
    """Per-vertex quadrics: sum of incident face plane quadrics, (n, 4, 4)."""
    faces = mesh.topology.faces
    fq = face_plane_quadrics(mesh.vertices, faces)
    out = np.zeros((mesh.num_vertices, 4, 4), dtype=np.float64)
    for col in range(3):
        np.add.at(out, faces[:, col], fq)
    return out


def _quadric_error(q: np.ndarray, p: np.ndarray) -> float:
    h = np.array([p[0], p[1], p[2], 1.0])
    return float(h @ q @ h)


def edge_collapse_cost(
    quadrics: np.ndarray, positions: np.ndarray, i: int, j: int
) -> tuple[float, int]:
    """Cost of collapsing edge (i, j) and the surviving endpoint.

    The survivor is the endpoint with the lower combined quadric error;
    equal errors keep the smaller index.
    """
    q = quadrics[i] + quadrics[j]
    err_i = _quadric_error(q, positions[i])
    err_j = _quadric_error(q, positions[j])
    if err_i <= err_j:
        return err_i, i
    return err_j, j


def decimate(mesh: TriMesh, target_count: int) -> tuple[Topology, np.ndarray]:
    """Greedy quadric edge collapse down to exactly ``target_count`` vertices.

    Returns the coarse topology (surviving vertices renumbered in
    increasing original-index order) and a map from every original vertex
    to the original index of its surviving representative. Raises
    :class:`DecimationError` with the achieved count if no further collapse
    is geometrically admissible.
    """
    n = mesh.num_vertices
    if not 0 < target_count < n:
        raise ValueError(f"target_count must be in 1..{n - 1}, got {target_count}")

    positions = mesh.vertices
    quadrics = vertex_quadrics(mesh)
    faces = [tuple(int(v) for v in f) for f in mesh.topology.faces]
    face_alive = [True] * len(faces)

    neighbors: list[set[int]] = [set() for _ in range(n)]
    vertex_faces: list[set[int]] = [set() for _ in range(n)]
    for fid, (a, b, c) in enumerate(faces):
        neighbors[a].update((b, c))
        neighbors[b].update((a, c))
        neighbors[c].update((a, b))
        vertex_faces[a].add(fid)
        vertex_faces[b].add(fid)
        vertex_faces[c].add(fid)

    alive = np.ones(n, dtype=bool)
    rep = np.arange(n, dtype=np.int64)
    stamps: dict[tuple[int, int], int] = {}
    heap: list[tuple[float, int, int, int]] = []

    def push(i: int, j: int) -> None:
        if i > j:
            i, j = j, i
        stamp = stamps.get((i, j), 0) + 1
        stamps[(i, j)] = stamp
        cost, _ = edge_collapse_cost(quadrics, positions, i, j)
        heapq.heappush(heap, (cost, i, j, stamp))

    for a, b in mesh.topology.edges:
        push(int(a), int(b))

    def face_vertices(fid: int) -> tuple[int, int, int]:
        return faces[fid]

    def collapse_admissible(survivor: int, dying: int) -> bool:
        shared = vertex_faces[survivor] & vertex_faces[dying]
        third = set()
        for fid in shared:
            for v in face_vertices(fid):
                if v != survivor and v != dying:
                    third.add(v)
        # link condition: every common neighbor must come from a shared
        # face, otherwise the collapse pinches the surface into a fin
        if (neighbors[survivor] & neighbors[dying]) != third:
            return False
        # remapped faces must not coincide with survivor's existing ones;
        # unchecked, a tetrahedron collapses into a doubled triangle
        existing = {
            frozenset(face_vertices(fid)) for fid in vertex_faces[survivor] - shared
        }
        for fid in vertex_faces[dying] - shared:
            remapped = frozenset(
                survivor if v == dying else v for v in face_vertices(fid)
            )
            if remapped in existing:
                return False
        p_s = positions[survivor]
        for fid in vertex_faces[dying] - shared:
            a, b, c = face_vertices(fid)
            pa, pb, pc = positions[a], positions[b], positions[c]
            before = np.cross(pb - pa, pc - pa)
            qa = p_s if a == dying else pa
            qb = p_s if b == dying else pb
            qc = p_s if c == dying else pc
            after = np.cross(qb - qa, qc - qa)
            if before @ after <= 0.0:
                return False
        return True

    def apply_collapse(survivor: int, dying: int) -> None:
        shared = vertex_faces[survivor] & vertex_faces[dying]
        for fid in shared:
            face_alive[fid] = False
            for v in face_vertices(fid):
                vertex_faces[v].discard(fid)
        for fid in list(vertex_faces[dying]):
            a, b, c = faces[fid]
            faces[fid] = tuple(survivor if v == dying else v for v in (a, b, c))
            vertex_faces[dying].discard(fid)
            vertex_faces[survivor].add(fid)
        for w in list(neighbors[dying]):
            neighbors[w].discard(dying)
            if w != survivor:
                neighbors[w].add(survivor)
                neighbors[survivor].add(w)
        neighbors[survivor].discard(survivor)
        neighbors[dying].clear()
        alive[dying] = False
        rep[dying] = survivor
        quadrics[survivor] = quadrics[survivor] + quadrics[dying]

    remaining = n
    blocked: list[tuple[int, int]] = []
    while remaining > target_count:
        if not heap:
            raise DecimationError(target_count, remaining)
        cost, i, j, stamp = heapq.heappop(heap)
        if not (alive[i] and alive[j]):
            continue
        if j not in neighbors[i] or stamps.get((i, j)) != stamp:
            continue
        _, survivor = edge_collapse_cost(quadrics, positions, i, j)
        dying = j if survivor == i else i
        if not collapse_admissible(survivor, dying):
            blocked.append((i, j))
            continue
        apply_collapse(survivor, dying)
        remaining -= 1
        for w in neighbors[survivor]:
            push(survivor, w)
        if blocked:
            for a, b in blocked:
                if alive[a] and alive[b] and b in neighbors[a]:
                    push(a, b)
            blocked.clear()

    # resolve representative chains to the final survivors
    for v in range(n):
        r = int(rep[v])
        while rep[r] != r:
            r = int(rep[r])
        rep[v] = r

    survivors = np.flatnonzero(alive)
    coarse_index = -np.ones(n, dtype=np.int64)
    coarse_index[survivors] = np.arange(len(survivors))
    out_faces = []
    seen = set()
    for fid, f in enumerate(faces):
        if not face_alive[fid]:
            continue
        key = tuple(sorted(f))
        if key in seen:
            raise DecimationError(target_count, remaining)
        seen.add(key)
        out_faces.append(tuple(int(coarse_index[v]) for v in f))
    topo = Topology(len(survivors), np.array(out_faces, dtype=np.int64))
    return topo, rep


def _closest_point_barycentric(p: np.ndarray, a, b, c):
    """Barycentric weights of the closest point to p on each triangle.

    Vectorized over m triangles; returns (weights (m, 3), squared distances
    (m,)). Region classification follows the standard closest-point-on-
    triangle case analysis.
    """
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = (ab * ap).sum(axis=1)
    d2 = (ac * ap).sum(axis=1)
    bp = p - b
    d3 = (ab * bp).sum(axis=1)
    d4 = (ac * bp).sum(axis=1)
    cp = p - c
    d5 = (ab * cp).sum(axis=1)
    d6 = (ac * cp).sum(axis=1)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    m = a.shape[0]
    w = np.zeros((m, 3), dtype=np.float64)
    done = np.zeros(m, dtype=bool)

    def settle(mask, u_val, v_val, w_val):
        mask = mask & ~done
        w[mask, 0] = u_val[mask] if isinstance(u_val, np.ndarray) else u_val
        w[mask, 1] = v_val[mask] if isinstance(v_val, np.ndarray) else v_val
        w[mask, 2] = w_val[mask] if isinstance(w_val, np.ndarray) else w_val
        done[mask] = True

    settle((d1 <= 0) & (d2 <= 0), 1.0, 0.0, 0.0)
    settle((d3 >= 0) & (d4 <= d3), 0.0, 1.0, 0.0)
    settle((d6 >= 0) & (d5 <= d6), 0.0, 0.0, 1.0)

    denom_ab = d1 - d3
    t_ab = np.divide(d1, denom_ab, out=np.zeros(m), where=denom_ab != 0)
    settle((vc <= 0) & (d1 >= 0) & (d3 <= 0), 1.0 - t_ab, t_ab, 0.0)

    denom_ac = d2 - d6
    t_ac = np.divide(d2, denom_ac, out=np.zeros(m), where=denom_ac != 0)
    settle((vb <= 0) & (d2 >= 0) & (d6 <= 0), 1.0 - t_ac, 0.0, t_ac)

    e1 = d4 - d3
    e2 = d5 - d6
    denom_bc = e1 + e2
    t_bc = np.divide(e1, denom_bc, out=np.zeros(m), where=denom_bc != 0)
    settle((va <= 0) & (e1 >= 0) & (e2 >= 0), 0.0, 1.0 - t_bc, t_bc)

    total = va + vb + vc
    inv = np.divide(1.0, total, out=np.zeros(m), where=total != 0)
    v_in = vb * inv
    w_in = vc * inv
    settle(total != 0, 1.0 - v_in - w_in, v_in, w_in)
    settle(np.ones(m, dtype=bool), 1.0, 0.0, 0.0)  # degenerate leftovers

    q = w[:, 0:1] * a + w[:, 1:2] * b + w[:, 2:3] * c
    dist2 = ((p - q) ** 2).sum(axis=1)
    return w, dist2


def _quantize_barycentric(w: np.ndarray) -> np.ndarray:
    """Snap weights to 30 fractional bits; the largest entry absorbs the
    residual so the row sums to exactly 1.0."""
    q = np.round(w * _WEIGHT_SCALE) / _WEIGHT_SCALE
    top = int(np.argmax(w))
    others = [k for k in range(3) if k != top]
    q[top] = 1.0 - q[others[0]] - q[others[1]]
    return q


@dataclass
class MeshHierarchy:
    """Stacked decimation levels with pooling transforms.

    ``levels[k]`` is the level-k topology (level 0 is the template),
    ``downs[k]`` maps level-k signals to level k+1 by survivor selection,
    and ``ups[k]`` maps level k+1 back to level k barycentrically.
    ``level_positions[k]`` holds the reference-pose coordinates at level k.
    """

    levels: list[Topology]
    downs: list[sparse.csr_matrix]
    ups: list[sparse.csr_matrix]
    factors: tuple[int, ...]
    reference: TriMesh
    level_positions: list[np.ndarray] = field(default_factory=list)

    @property
    def level_sizes(self) -> list[int]:
        return [t.num_vertices for t in self.levels]

    @property
    def num_levels(self) -> int:
        return len(self.levels)


def build_hierarchy(
    reference: TriMesh,
    factors: tuple[int, ...] = (4, 4, 2, 2),
    candidate_faces: int = 48,
) -> MeshHierarchy:
    """Build a pooling hierarchy by repeated decimation of a reference pose.

    Each level has ceil(n_k / factor_k) vertices. The construction is fully
    deterministic: rebuilding from the same reference yields bitwise
    identical transforms.
    """
    factors = tuple(int(f) for f in factors)
    if any(f < 1 for f in factors):
        raise ValueError("factors must be >= 1")

    levels = [reference.topology]
    level_positions = [reference.vertices.copy()]
    downs: list[sparse.csr_matrix] = []
    ups: list[sparse.csr_matrix] = []

    topo = reference.topology
    pos = reference.vertices
    for factor in factors:
        n = topo.num_vertices
        target = -(-n // factor)  # ceil division
        if factor == 1 or target == n:
            eye = sparse.identity(n, dtype=np.float64, format="csr")
            downs.append(eye)
            ups.append(eye.copy())
            levels.append(topo)
            level_positions.append(pos.copy())
            continue

        coarse_topo, rep = decimate(TriMesh(topo, pos), target)
        survivors = np.flatnonzero(rep == np.arange(n))
        coarse_index = -np.ones(n, dtype=np.int64)
        coarse_index[survivors] = np.arange(len(survivors))
        coarse_pos = pos[survivors]

        m = len(survivors)
        down = sparse.csr_matrix(
            (np.ones(m), (np.arange(m), survivors)), shape=(m, n), dtype=np.float64
        )
        down.sort_indices()

        rows, cols, vals = [], [], []
        removed = np.flatnonzero(coarse_index < 0)
        cfaces = coarse_topo.faces
        tri_a = coarse_pos[cfaces[:, 0]]
        tri_b = coarse_pos[cfaces[:, 1]]
        tri_c = coarse_pos[cfaces[:, 2]]
        centroids = (tri_a + tri_b + tri_c) / 3.0
        tree = cKDTree(centroids)
        k_query = min(candidate_faces, len(cfaces))
        for v in range(n):
            if coarse_index[v] >= 0:
                rows.append(v)
                cols.append(int(coarse_index[v]))
                vals.append(1.0)
        for v in removed:
            p = pos[v]
            _, cand = tree.query(p, k=k_query)
            cand = np.atleast_1d(cand)
            w, dist2 = _closest_point_barycentric(
                p, tri_a[cand], tri_b[cand], tri_c[cand]
            )
            best = int(np.argmin(dist2))
            weights = _quantize_barycentric(w[best])
            for corner, wv in zip(cfaces[cand[best]], weights):
                rows.append(v)
                cols.append(int(corner))
                vals.append(float(wv))
        up = sparse.csr_matrix((vals, (rows, cols)), shape=(n, m), dtype=np.float64)
        up.sum_duplicates()
        up.sort_indices()

        downs.append(down)
        ups.append(up)
        levels.append(coarse_topo)
        level_positions.append(coarse_pos)
        topo = coarse_topo
        pos = coarse_pos

    return MeshHierarchy(
        levels=levels,
        downs=downs,
        ups=ups,
        factors=factors,
        reference=reference,
        level_positions=level_positions,
    )


def _apply_transform(matrix: sparse.csr_matrix, signal: np.ndarray) -> np.ndarray:
    """Apply a pooling matrix to (n, c) or batched (B, n, c) signals."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim not in (2, 3):
        raise ValueError(f"signal must be (n, c) or (B, n, c), got {signal.shape}")
    if signal.shape[-2] != matrix.shape[1]:
        raise ValueError(
            f"signal has {signal.shape[-2]} vertices, level expects {matrix.shape[1]}"
        )
    if signal.ndim == 2:
        return _kernels.spmm(matrix, signal)
    batch, n, ch = signal.shape
    flat = np.ascontiguousarray(signal.transpose(1, 0, 2).reshape(n, batch * ch))
    out = _kernels.spmm(matrix, flat)
    return out.reshape(matrix.shape[0], batch, ch).transpose(1, 0, 2)


def downsample(hierarchy: MeshHierarchy, level: int, signal: np.ndarray) -> np.ndarray:
    """Restrict a level-``level`` signal to level ``level + 1``."""
    return _apply_transform(hierarchy.downs[level], signal)


def upsample(hierarchy: MeshHierarchy, level: int, signal: np.ndarray) -> np.ndarray:
    """Prolong a level-``level + 1`` signal back to level ``level``."""
    return _apply_transform(hierarchy.ups[level], signal)
