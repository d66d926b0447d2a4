"""Shared test helpers: finite-difference oracles and random graphs."""

import numpy as np

from spectralmesh.mesh import Topology, TriMesh


def central_diff(fn, x, step=1e-5):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.ravel()
    xf = x.ravel()
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + step
        hi = fn(x)
        xf[i] = orig - step
        lo = fn(x)
        xf[i] = orig
        flat[i] = (hi - lo) / (2 * step)
    return grad


def rel_err(approx, exact):
    """Relative error with an absolute floor so zeros compare cleanly."""
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    denom = max(np.abs(exact).max(), 1e-8)
    return float(np.abs(approx - exact).max() / denom)


def random_connected_graph(rng, num_vertices, extra_edges=None):
    """Random connected undirected graph: spanning tree plus extras."""
    order = rng.permutation(num_vertices)
    edges = set()
    for k in range(1, num_vertices):
        a = int(order[k])
        b = int(order[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    if extra_edges is None:
        extra_edges = num_vertices // 2
    for _ in range(extra_edges):
        a, b = rng.choice(num_vertices, size=2, replace=False)
        a, b = int(a), int(b)
        edges.add((min(a, b), max(a, b)))
    return sorted(edges)


def random_connected_mesh(rng, num_vertices):
    """Random triangulated connected topology via a fan plus extra faces.

    Positions are random; the fan guarantees connectivity, the extra faces
    vary degree. Good enough as a graph, not as a manifold surface.
    """
    faces = [(0, i, i + 1) for i in range(1, num_vertices - 1)]
    extra = max(num_vertices // 3, 1)
    for _ in range(extra):
        tri = rng.choice(num_vertices, size=3, replace=False)
        a, b, c = (int(v) for v in tri)
        if len({a, b, c}) == 3:
            faces.append((a, b, c))
    topo = Topology(num_vertices, faces)
    verts = rng.standard_normal((num_vertices, 3))
    return TriMesh(topo, verts)
