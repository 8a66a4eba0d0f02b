"""Structured T10 mesh generators for the built-in scenarios.

Boxes are split into six tetrahedra per cube along the main diagonal,
which gives conforming faces between neighbouring cubes.  Spheres map the
same cube grid radially onto a ball.  Surface quadratic faces are written
as four flat sub-triangles so contact sees the mid-edge nodes.
"""
from __future__ import annotations

from itertools import permutations

import numpy as np

from .core import T10_EDGES, Mesh, corner_volumes

_FACES = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))  # outward for positive tets


def kuhn_cube_tets(nx: int, ny: int, nz: int) -> tuple[np.ndarray, np.ndarray]:
    """Corner lattice (integer coords) and linear tets of an nx*ny*nz cube grid."""
    gi, gj, gk = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), np.arange(nz + 1), indexing="ij")
    lattice = np.stack([gi.ravel(), gj.ravel(), gk.ravel()], 1)

    def vid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    tets = []
    unit = np.eye(3, dtype=int)
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                base = np.array([i, j, k])
                for a, b, _ in permutations(range(3)):
                    path = [base, base + unit[a], base + unit[a] + unit[b], base + 1]
                    ids = [vid(*p) for p in path]
                    tets.append(ids)
    tets = np.asarray(tets, dtype=np.int64)
    # orient positively
    vol = corner_volumes(lattice.astype(float), np.pad(tets, ((0, 0), (0, 6))))
    neg = vol < 0
    tets[neg, 1], tets[neg, 2] = tets[neg, 2].copy(), tets[neg, 1].copy()
    return lattice, tets


def t10_from_tets(corners: np.ndarray, tets: np.ndarray, midpoint=None):
    """Add mid-edge nodes to linear tets.

    ``midpoint(i, j)`` returns positions for corner pairs (arrays); by
    default the straight midpoint is used.
    """
    n = len(corners)
    pairs = np.concatenate([tets[:, [a, b]] for a, b in T10_EDGES])
    lo, hi = np.minimum(pairs[:, 0], pairs[:, 1]), np.maximum(pairs[:, 0], pairs[:, 1])
    keys = lo * n + hi
    uniq, inv = np.unique(keys, return_inverse=True)
    ui, uj = uniq // n, uniq % n
    if midpoint is None:
        mids = 0.5 * (corners[ui] + corners[uj])
    else:
        mids = midpoint(ui, uj)
    nodes = np.concatenate([corners, mids])
    m = len(tets)
    mid_ids = n + inv.reshape(6, m).T
    elements = np.concatenate([tets, mid_ids], axis=1)
    return nodes, elements


def boundary_triangles(elements: np.ndarray, split: bool = True) -> np.ndarray:
    """Outward surface triangles of a positively oriented T10 mesh."""
    faces, mids = [], []
    edge_slot = {}
    for k, (a, b) in enumerate(T10_EDGES):
        edge_slot[(a, b)] = 4 + k
        edge_slot[(b, a)] = 4 + k
    for f in _FACES:
        faces.append(elements[:, f])
        mids.append(elements[:, [edge_slot[(f[0], f[1])], edge_slot[(f[1], f[2])], edge_slot[(f[2], f[0])]]])
    faces = np.concatenate(faces)
    mids = np.concatenate(mids)
    key = np.sort(faces, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    boundary = counts[inv] == 1
    f, mdd = faces[boundary], mids[boundary]
    if not split:
        return f
    c0, c1, c2 = f[:, 0], f[:, 1], f[:, 2]
    m01, m12, m20 = mdd[:, 0], mdd[:, 1], mdd[:, 2]
    tris = np.concatenate([
        np.stack([c0, m01, m20], 1), np.stack([m01, c1, m12], 1),
        np.stack([m20, m12, c2], 1), np.stack([m01, m12, m20], 1)])
    return tris


def _finish(nodes, elements, body, split=True) -> Mesh:
    tris = boundary_triangles(elements, split=split)
    mesh = Mesh(nodes, elements, tris, np.full(len(tris), body), np.full(len(nodes), body))
    return mesh


def box_mesh(size=(1.0, 1.0, 1.0), divisions=(1, 1, 1), origin=(0.0, 0.0, 0.0), body: int = 0) -> Mesh:
    """Axis-aligned box ``[origin, origin + size]`` with ``6*nx*ny*nz`` T10 elements."""
    nx, ny, nz = (int(d) for d in divisions)
    lattice, tets = kuhn_cube_tets(nx, ny, nz)
    h = np.asarray(size, dtype=float) / np.array([nx, ny, nz])
    corners = np.asarray(origin, dtype=float) + lattice * h
    nodes, elements = t10_from_tets(corners, tets)
    return _finish(nodes, elements, body)


def _ball_map(p, radius):
    p = np.asarray(p, dtype=float)
    inf = np.max(np.abs(p), axis=-1, keepdims=True)
    two = np.linalg.norm(p, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(two > 0, inf / two, 0.0)
    return radius * p * s


def sphere_mesh(radius: float = 1.0, n: int = 4, center=(0.0, 0.0, 0.0), body: int = 0) -> Mesh:
    """Ball from a radially mapped ``n^3`` cube grid (``6 n^3`` elements, curved mid-edge nodes)."""
    lattice, tets = kuhn_cube_tets(n, n, n)
    cube = -1.0 + 2.0 * lattice / n
    corners = _ball_map(cube, radius)

    def mid(i, j):
        return _ball_map(0.5 * (cube[i] + cube[j]), radius)

    nodes, elements = t10_from_tets(corners, tets, mid)
    nodes = nodes + np.asarray(center, dtype=float)
    return _finish(nodes, elements, body)


def plane_surface(center, normal, half_size: float, body: int):
    """Two-triangle square patch (static environment surface).

    Returns ``(nodes, triangles)`` with triangles wound so that the normal
    is ``normal``.
    """
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    t = np.cross(n, [1.0, 0.0, 0.0])
    if np.linalg.norm(t) < 1e-6:
        t = np.cross(n, [0.0, 1.0, 0.0])
    t /= np.linalg.norm(t)
    s = np.cross(n, t)
    c = np.asarray(center, dtype=float)
    P = np.array([c - half_size * t - half_size * s, c + half_size * t - half_size * s,
                  c + half_size * t + half_size * s, c - half_size * t + half_size * s])
    tris = np.array([[0, 1, 2], [0, 2, 3]])
    if np.dot(np.cross(P[1] - P[0], P[2] - P[0]), n) < 0:
        tris = tris[:, ::-1].copy()
    return P, tris


def merge_meshes(*meshes: Mesh) -> Mesh:
    """Concatenate meshes, offsetting node indices (body ids are kept)."""
    nodes, els, tris, tb, bon = [], [], [], [], []
    off = 0
    for m in meshes:
        nodes.append(m.nodes)
        els.append(m.elements + off)
        tris.append(m.triangles + off)
        tb.append(m.triangle_body)
        bon.append(m.body_of_node)
        off += m.n_nodes
    return Mesh(np.concatenate(nodes), np.concatenate(els), np.concatenate(tris),
                np.concatenate(tb), np.concatenate(bon))


def rotate_mesh(mesh: Mesh, R, about=(0.0, 0.0, 0.0)) -> Mesh:
    about = np.asarray(about, dtype=float)
    nodes = (mesh.nodes - about) @ np.asarray(R).T + about
    return Mesh(nodes, mesh.elements.copy(), mesh.triangles.copy(), mesh.triangle_body.copy(),
                mesh.body_of_node.copy())


def rotation_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def cantilever_mesh(res: int = 0) -> Mesh:
    """3 x 2 x 1 m beam; ``res`` 0, 2 or 4 refines the cube grid."""
    div = {0: (3, 2, 1), 2: (6, 4, 2), 4: (9, 6, 3)}
    if res not in div:
        raise ValueError(f"unknown resolution {res}; choose 0, 2 or 4")
    return box_mesh((3.0, 2.0, 1.0), div[res])


def two_element_mesh(body: int = 0) -> Mesh:
    """Two T10 elements sharing a face (smallest mesh with an interior face)."""
    corners = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]])
    nodes, elements = t10_from_tets(corners, np.array([[0, 1, 2, 3], [1, 2, 3, 4]]))
    return _finish(nodes, elements, body)
