"""Mesh files, VTK output and the per-step metrics CSV.

Mesh format (plain text, ``#`` starts a comment)::

    tlmesh 1
    nodes N
    x y z                      (N lines)
    tets10 M
    i0 i1 ... i9               (M lines, zero-based)
    surface K body_id
    a b c                      (K lines; repeatable block)

Nodes take the body id of the surface blocks that reference them; nodes
reached by no surface block inherit the id of the elements they belong
to (propagated from a surface node of the same element).
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .assembly import compute_stress_stage1
from .core import Mesh
from .errors import InvalidMeshError, TlfeaError
from .materials import cauchy_von_mises


class MeshFormatError(InvalidMeshError):
    """A mesh file does not follow the ``tlmesh 1`` grammar."""

    def __init__(self, message, path=None, line=None):
        where = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(where + message)
        self.line = line


class OutputError(TlfeaError, OSError):
    """Writing a result file failed."""


VTK_QUADRATIC_TETRA = 24
METRICS_COLUMNS = ("step", "t", "inner", "outer", "g_norm", "c_norm", "n_contacts", "wall_ms")


def _lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                yield no, text


def _read_rows(it, count, width, kind, path, conv):
    rows = []
    for _ in range(count):
        try:
            no, text = next(it)
        except StopIteration:
            raise MeshFormatError(f"file ended inside the {kind} block", path, "EOF") from None
        parts = text.split()
        if len(parts) != width:
            raise MeshFormatError(f"expected {width} values in {kind} row, got {len(parts)}", path, no)
        try:
            rows.append([conv(p) for p in parts])
        except ValueError:
            raise MeshFormatError(f"malformed number in {kind} row", path, no) from None
    return rows


def _header_count(text, word, path, no, extra=0):
    parts = text.split()
    if parts[0] != word or len(parts) != 2 + extra:
        raise MeshFormatError(f"expected '{word} <count>{' <body_id>' if extra else ''}', got '{text}'",
                              path, no)
    try:
        vals = [int(p) for p in parts[1:]]
    except ValueError:
        raise MeshFormatError(f"malformed count in '{text}'", path, no) from None
    if vals[0] < 0:
        raise MeshFormatError("negative count", path, no)
    return vals


def load_mesh(path) -> Mesh:
    """Parse and validate a ``tlmesh 1`` file."""
    path = os.fspath(path)
    it = _lines(path)
    try:
        no, text = next(it)
    except StopIteration:
        raise MeshFormatError("empty mesh file", path, 1) from None
    if text.split() != ["tlmesh", "1"]:
        raise MeshFormatError(f"expected header 'tlmesh 1', got '{text}'", path, no)
    no, text = next(it, (no + 1, "<end of file>"))
    (n,) = _header_count(text, "nodes", path, no)
    nodes = np.array(_read_rows(it, n, 3, "nodes", path, float), dtype=float).reshape(-1, 3)
    no, text = next(it, (no + 1, "<end of file>"))
    (m,) = _header_count(text, "tets10", path, no)
    elements = np.array(_read_rows(it, m, 10, "tets10", path, int), dtype=np.int64).reshape(-1, 10)
    if m and (elements.min() < 0 or elements.max() >= n):
        raise MeshFormatError("element references a node index out of range", path, no)
    tris, tri_body = [], []
    for no, text in it:
        k, body = _header_count(text, "surface", path, no, extra=1)
        rows = _read_rows(it, k, 3, "surface", path, int)
        tris.extend(rows)
        tri_body.extend([body] * k)
    tris = np.array(tris, dtype=np.int64).reshape(-1, 3)
    tri_body = np.array(tri_body, dtype=np.int64)
    if len(tris) and (tris.min() < 0 or tris.max() >= n):
        raise MeshFormatError("surface triangle references a node index out of range", path, "surface")
    body_of_node = _infer_bodies(n, elements, tris, tri_body)
    mesh = Mesh(nodes, elements, tris, tri_body, body_of_node)
    mesh.validate()
    return mesh


def _infer_bodies(n, elements, tris, tri_body):
    body = np.full(n, -1, dtype=np.int64)
    body[tris.reshape(-1)] = np.repeat(tri_body, 3)
    for _ in range(len(elements) + 1):
        known = body[elements]
        changed = False
        for e in np.flatnonzero(np.any(known < 0, axis=1) & np.any(known >= 0, axis=1)):
            b = known[e][known[e] >= 0][0]
            body[elements[e][known[e] < 0]] = b
            changed = True
        if not changed:
            break
    body[body < 0] = 0
    return body


def save_mesh(mesh: Mesh, path) -> None:
    """Write ``mesh`` in the ``tlmesh 1`` format (coordinates with round-trip precision)."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("tlmesh 1\n")
            fh.write(f"nodes {mesh.n_nodes}\n")
            for x in mesh.nodes.tolist():
                fh.write(f"{x[0]!r} {x[1]!r} {x[2]!r}\n")
            fh.write(f"tets10 {mesh.n_elements}\n")
            for e in mesh.elements:
                fh.write(" ".join(str(int(i)) for i in e) + "\n")
            for b in np.unique(mesh.triangle_body):
                t = mesh.triangles[mesh.triangle_body == b]
                fh.write(f"surface {len(t)} {int(b)}\n")
                for tri in t:
                    fh.write(f"{int(tri[0])} {int(tri[1])} {int(tri[2])}\n")
    except OSError as err:
        raise OutputError(f"cannot write mesh '{path}': {err}") from err


@dataclass
class MeshInfo:
    n_nodes: int
    n_elements: int
    n_dofs: int
    n_triangles: int
    bodies: list
    volume: float
    min_corner_volume: float
    bbox: tuple

    def lines(self) -> list[str]:
        lo, hi = self.bbox
        return [
            f"nodes      {self.n_nodes}",
            f"elements   {self.n_elements}",
            f"dofs       {self.n_dofs}",
            f"triangles  {self.n_triangles}",
            f"bodies     {' '.join(str(b) for b in self.bodies)}",
            f"volume     {self.volume:.6g}",
            f"min corner volume {self.min_corner_volume:.6g}",
            f"bbox       [{lo[0]:.4g} {lo[1]:.4g} {lo[2]:.4g}] .. [{hi[0]:.4g} {hi[1]:.4g} {hi[2]:.4g}]",
        ]


def mesh_info(mesh: Mesh) -> MeshInfo:
    from .core import corner_volumes
    from .precompute import precompute_elements

    vol = float(precompute_elements(mesh, 1.0).volumes.sum()) if mesh.n_elements else 0.0
    cv = corner_volumes(mesh.nodes, mesh.elements)
    return MeshInfo(mesh.n_nodes, mesh.n_elements, mesh.n_dofs, len(mesh.triangles),
                    [int(b) for b in mesh.body_ids], vol, float(cv.min()) if len(cv) else 0.0,
                    (mesh.nodes.min(axis=0), mesh.nodes.max(axis=0)))


# ------------------------------------------------------------------ VTK

def nodal_von_mises(system, q) -> np.ndarray:
    """Elastic von Mises stress averaged from elements to their nodes.

    Each element contributes the weight-averaged value over its
    quadrature points to all ten of its nodes.
    """
    pre = system.precomp
    v0 = np.zeros_like(q)
    buf = compute_stress_stage1(q, v0, system.elements, pre, system.matrows, with_viscous=False,
                                X_ref=system.mesh.nodes)
    vm = cauchy_von_mises(buf.P, buf.F)
    w = pre.j0w
    vm_el = (vm * w).sum(axis=1) / w.sum(axis=1)
    acc = np.zeros(system.n_nodes)
    cnt = np.zeros(system.n_nodes)
    np.add.at(acc, system.elements.reshape(-1), np.repeat(vm_el, 10))
    np.add.at(cnt, system.elements.reshape(-1), 1.0)
    return np.divide(acc, cnt, out=np.zeros_like(acc), where=cnt > 0)


def write_vtk(path, mesh: Mesh, q, v, von_mises=None, title: str = "tlfea state") -> None:
    """Legacy ASCII unstructured grid with quadratic tetrahedra (cell type 24)."""
    X = np.asarray(q, dtype=float).reshape(-1, 3)
    V = np.asarray(v, dtype=float).reshape(-1, 3)
    vm = np.zeros(len(X)) if von_mises is None else np.asarray(von_mises, dtype=float)
    m = mesh.n_elements
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("# vtk DataFile Version 3.0\n")
            fh.write(title.replace("\n", " ")[:255] + "\n")
            fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
            fh.write(f"POINTS {len(X)} double\n")
            np.savetxt(fh, X, fmt="%.17g")
            fh.write(f"CELLS {m} {11 * m}\n")
            np.savetxt(fh, np.hstack([np.full((m, 1), 10), mesh.elements]), fmt="%d")
            fh.write(f"CELL_TYPES {m}\n")
            np.savetxt(fh, np.full(m, VTK_QUADRATIC_TETRA), fmt="%d")
            fh.write(f"POINT_DATA {len(X)}\n")
            fh.write("VECTORS velocity double\n")
            np.savetxt(fh, V, fmt="%.17g")
            fh.write("SCALARS von_mises double 1\nLOOKUP_TABLE default\n")
            np.savetxt(fh, vm, fmt="%.17g")
    except OSError as err:
        raise OutputError(f"cannot write VTK file '{path}': {err}") from err


def write_state_vtk(path, system, state, title: str = "tlfea state") -> None:
    write_vtk(path, system.mesh, state.q, state.v, nodal_von_mises(system, state.q), title)


# ------------------------------------------------------------------ CSV

class MetricsWriter:
    """Streams one CSV row per step with :data:`METRICS_COLUMNS`."""

    def __init__(self, path):
        self.path = os.fspath(path)
        try:
            self._fh = open(self.path, "w", newline="", encoding="utf-8")
        except OSError as err:
            raise OutputError(f"cannot open metrics file '{path}': {err}") from err
        self._w = csv.writer(self._fh)
        self._w.writerow(METRICS_COLUMNS)

    def write(self, report) -> None:
        self._w.writerow([report.step, repr(float(report.t)), report.inner_iters_total, report.outer_iters,
                          f"{report.grad_norm:.6e}", f"{report.constraint_norm:.6e}", report.n_contacts,
                          f"{1e3 * report.wall_time:.3f}"])

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
