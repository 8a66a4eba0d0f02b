"""Domain types shared by every module, the DOF convention and the step map.

Coefficient index equals node index for quadratic tetrahedra, and the
flat DOF layout is node-major: ``dof(I, d) = 3*I + d``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidMeshError, UsageError

#: Local corner pairs of the six mid-edge nodes (local indices 4..9).
T10_EDGES = ((0, 1), (1, 2), (2, 0), (0, 3), (1, 3), (2, 3))


def dof_index(I: int, d: int) -> int:
    """Flat DOF index of component ``d`` of coefficient ``I``."""
    if d not in (0, 1, 2):
        raise UsageError(f"component must be 0, 1 or 2, got {d}")
    if I < 0:
        raise UsageError(f"coefficient index must be non-negative, got {I}")
    return 3 * int(I) + int(d)


def dof_components(k: int) -> tuple[int, int]:
    """Inverse of :func:`dof_index`: ``k -> (I, d)``."""
    if k < 0:
        raise UsageError(f"DOF index must be non-negative, got {k}")
    return divmod(int(k), 3)


def step_map(q_n: np.ndarray, v: np.ndarray, h: float) -> np.ndarray:
    """Backward-Euler position update ``q_n + h*v`` (inputs are not modified)."""
    q_n = np.asarray(q_n, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if q_n.shape != v.shape:
        raise UsageError(f"length mismatch: q has {q_n.shape}, v has {v.shape}")
    if not h > 0:
        raise UsageError(f"step size must be positive, got {h}")
    return q_n + h * v


def corner_volumes(X: np.ndarray, elements: np.ndarray) -> np.ndarray:
    """Signed volumes of the corner tetrahedra of every element."""
    x0 = X[elements[:, 0]]
    a = X[elements[:, 1]] - x0
    b = X[elements[:, 2]] - x0
    c = X[elements[:, 3]] - x0
    return np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0


@dataclass
class Mesh:
    """Reference geometry of all bodies in a scene.

    Attributes
    ----------
    nodes : (n, 3) float array
        Reference nodal positions in metres.
    elements : (m, 10) int array
        T10 connectivity; local nodes 4..9 sit on the edges listed in
        :data:`T10_EDGES`.
    triangles : (k, 3) int array
        Oriented surface triangles (outward normal by right-hand rule).
    triangle_body : (k,) int array
        Owning body of each surface triangle.
    body_of_node : (n,) int array
        Body id of each node.
    """

    nodes: np.ndarray
    elements: np.ndarray
    triangles: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))
    triangle_body: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    body_of_node: np.ndarray | None = None

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=np.float64).reshape(-1, 3)
        self.elements = np.ascontiguousarray(self.elements, dtype=np.int64).reshape(-1, 10)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.triangle_body = np.ascontiguousarray(self.triangle_body, dtype=np.int64).reshape(-1)
        if self.body_of_node is None:
            self.body_of_node = np.zeros(len(self.nodes), dtype=np.int64)
        self.body_of_node = np.ascontiguousarray(self.body_of_node, dtype=np.int64).reshape(-1)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_dofs(self) -> int:
        return 3 * len(self.nodes)

    @property
    def body_ids(self) -> np.ndarray:
        return np.unique(self.body_of_node)

    def element_body(self) -> np.ndarray:
        """Body id of every element (taken from its first node)."""
        return self.body_of_node[self.elements[:, 0]] if self.n_elements else np.zeros(0, np.int64)

    def validate(self) -> None:
        """Check the structural invariants and raise :class:`InvalidMeshError`."""
        n = self.n_nodes
        if not np.all(np.isfinite(self.nodes)):
            raise InvalidMeshError("non-finite nodal coordinate")
        if len(self.body_of_node) != n:
            raise InvalidMeshError("body_of_node length differs from node count")
        if self.n_elements:
            if self.elements.min() < 0 or self.elements.max() >= n:
                raise InvalidMeshError("element references a node index out of range")
            srt = np.sort(self.elements, axis=1)
            dup = np.any(srt[:, 1:] == srt[:, :-1], axis=1)
            if dup.any():
                raise InvalidMeshError(f"element {int(np.argmax(dup))} repeats a node")
            bodies = self.body_of_node[self.elements]
            mixed = np.any(bodies != bodies[:, :1], axis=1)
            if mixed.any():
                raise InvalidMeshError(f"element {int(np.argmax(mixed))} spans two bodies")
            vol = corner_volumes(self.nodes, self.elements)
            bad = np.flatnonzero(vol <= 0.0)
            if bad.size:
                raise InvalidMeshError(
                    f"element {int(bad[0])} has non-positive corner volume {vol[bad[0]]:.3e}"
                )
        if len(self.triangles):
            if len(self.triangle_body) != len(self.triangles):
                raise InvalidMeshError("triangle_body length differs from triangle count")
            if self.triangles.min() < 0 or self.triangles.max() >= n:
                raise InvalidMeshError("surface triangle references a node out of range")
            tb = self.body_of_node[self.triangles]
            wrong = np.any(tb != self.triangle_body[:, None], axis=1)
            if wrong.any():
                raise InvalidMeshError(
                    f"surface triangle {int(np.argmax(wrong))} uses nodes of another body"
                )
            check_winding(self.nodes, self.triangles, self.triangle_body)

    def nodes_of_body(self, body: int) -> np.ndarray:
        return np.flatnonzero(self.body_of_node == body)

    def surface_nodes_of_body(self, body: int) -> np.ndarray:
        return np.unique(self.triangles[self.triangle_body == body])


def check_winding(X: np.ndarray, tris: np.ndarray, tri_body: np.ndarray) -> None:
    """Reject surfaces whose triangles are not consistently oriented.

    Every directed edge may occur at most once per body; for a closed
    surface the enclosed signed volume must also be positive (outward).
    """
    for b in np.unique(tri_body):
        t = tris[tri_body == b]
        directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        keys = directed[:, 0] * (X.shape[0] + 1) + directed[:, 1]
        uniq, counts = np.unique(keys, return_counts=True)
        if np.any(counts > 1):
            raise InvalidMeshError(f"body {int(b)}: inconsistent triangle winding")
        rev = directed[:, 1] * (X.shape[0] + 1) + directed[:, 0]
        closed = np.all(np.isin(rev, uniq))
        if closed:
            p0, p1, p2 = X[t[:, 0]], X[t[:, 1]], X[t[:, 2]]
            vol = np.einsum("ij,ij->", p0, np.cross(p1, p2)) / 6.0
            if vol <= 0.0:
                raise InvalidMeshError(f"body {int(b)}: surface normals point inward")


@dataclass
class SystemState:
    """Generalized coordinates ``q``, velocities ``v`` and time ``t``."""

    q: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.q = np.array(self.q, dtype=np.float64).reshape(-1)
        self.v = np.array(self.v, dtype=np.float64).reshape(-1)
        if self.q.shape != self.v.shape:
            raise UsageError("q and v must have identical length")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.v))):
            raise UsageError("state contains non-finite entries")

    @classmethod
    def at_rest(cls, mesh: Mesh) -> "SystemState":
        return cls(mesh.nodes.reshape(-1).copy(), np.zeros(mesh.n_dofs), 0.0)

    def copy(self) -> "SystemState":
        return SystemState(self.q.copy(), self.v.copy(), self.t)

    def positions(self) -> np.ndarray:
        return self.q.reshape(-1, 3)

    def velocities(self) -> np.ndarray:
        return self.v.reshape(-1, 3)


@dataclass
class TimeStepConfig:
    """Step size ``h``, number of steps and uniform gravity."""

    h: float
    n_steps: int = 1
    gravity: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.h > 0:
            raise UsageError(f"time step must be positive, got {self.h}")
        if int(self.n_steps) < 1:
            raise UsageError(f"n_steps must be at least 1, got {self.n_steps}")
        self.n_steps = int(self.n_steps)
        self.gravity = tuple(float(g) for g in self.gravity)
        if len(self.gravity) != 3:
            raise UsageError("gravity must be a 3-vector")
