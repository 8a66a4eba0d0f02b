"""Bilateral constraints enforced through the augmented Lagrangian.

Two primitives are supported: coordinate-difference rows (CD: a single
coordinate pinned to a target, or two coordinates kept at a fixed
offset) and dot-product rows (DP1: two vectors kept at a fixed dot
product).  Joints are named groups of rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SolverStateError, UsageError
from .sparse import CsrMatrix, build_rect_pattern


@dataclass
class CdConstraint:
    """``c = q[3j+d] - q[3i+d] - offset`` (pair) or ``q[3i+d] - target(t)`` (anchor)."""

    kind: str
    node_i: int
    d: int
    node_j: int = -1
    target: float | Callable[[float], float] = 0.0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in ("anchor", "pair"):
            raise UsageError(f"CD kind must be 'anchor' or 'pair', got {self.kind}")
        if self.d not in (0, 1, 2):
            raise UsageError("CD component must be 0, 1 or 2")
        if self.kind == "pair" and self.node_j < 0:
            raise UsageError("pair CD needs node_j")


@dataclass
class Dp1Constraint:
    """``c = a . b - c0`` with ``a = x[p2] - x[p1]`` and ``b = x[p4] - x[p3]`` or fixed."""

    p1: int
    p2: int
    p3: int = -1
    p4: int = -1
    world: tuple | None = None
    c0: float = 0.0

    def __post_init__(self):
        if self.world is None and (self.p3 < 0 or self.p4 < 0):
            raise UsageError("DP1 needs a second node pair or a fixed world vector")


@dataclass
class Joint:
    name: str
    rows: slice
    cd_rows: list = field(default_factory=list)


class ConstraintSet:
    """Ordered constraint rows, multipliers ``lam`` and penalty ``rho``."""

    def __init__(self, n_dofs: int, rho: float = 1.0):
        if not rho > 0:
            raise UsageError("penalty rho must be positive")
        self.n_dofs = int(n_dofs)
        self.rho = float(rho)
        self.rows: list = []
        self.joints: dict[str, Joint] = {}
        self.lam = np.zeros(0)
        self.jac: CsrMatrix | None = None
        self.in_step = False
        self._frozen = False

    # ------------------------------------------------------------ building
    def add(self, row) -> int:
        if self._frozen:
            raise UsageError("constraint pattern is fixed once finalized")
        self.rows.append(row)
        return len(self.rows) - 1

    def add_joint(self, name: str, rows: list) -> Joint:
        if name in self.joints:
            raise UsageError(f"duplicate joint name '{name}'")
        start = len(self.rows)
        for r in rows:
            self.add(r)
        cd = [start + k for k, r in enumerate(rows) if isinstance(r, CdConstraint)]
        j = Joint(name, slice(start, len(self.rows)), cd)
        self.joints[name] = j
        return j

    @property
    def m(self) -> int:
        return len(self.rows)

    def finalize(self) -> "ConstraintSet":
        """Freeze the row list and build the fixed Jacobian pattern."""
        if self._frozen:
            return self
        m, n = self.m, self.n_dofs
        self.lam = np.zeros(m)
        cd = [(k, r) for k, r in enumerate(self.rows) if isinstance(r, CdConstraint)]
        dp = [(k, r) for k, r in enumerate(self.rows) if isinstance(r, Dp1Constraint)]
        self._cd_row = np.array([k for k, _ in cd], dtype=np.int64)
        self._cd_i = np.array([3 * r.node_i + r.d for _, r in cd], dtype=np.int64)
        self._cd_j = np.array([3 * r.node_j + r.d if r.kind == "pair" else -1 for _, r in cd], dtype=np.int64)
        self._cd_off = np.array([r.offset for _, r in cd], dtype=float)
        self._cd_target = [r.target if r.kind == "anchor" else None for _, r in cd]
        self._cd_static_target = np.array(
            [float(t) if (t is not None and not callable(t)) else 0.0 for t in self._cd_target])
        self._cd_callables = [(k, t) for k, t in enumerate(self._cd_target) if callable(t)]
        self._dp_row = np.array([k for k, _ in dp], dtype=np.int64)
        self._dp_nodes = np.array([[r.p1, r.p2, max(r.p3, 0), max(r.p4, 0)] for _, r in dp],
                                  dtype=np.int64).reshape(-1, 4)
        self._dp_world = np.array([r.world if r.world is not None else (0.0, 0.0, 0.0) for _, r in dp],
                                  dtype=float).reshape(-1, 3)
        self._dp_has_world = np.array([r.world is not None for _, r in dp], dtype=bool)
        self._dp_c0 = np.array([r.c0 for _, r in dp], dtype=float)

        # Jacobian contributions: (row, col) for each scalar slot
        rr, cc = [], []
        anchor = self._cd_j < 0
        rr += [self._cd_row, self._cd_row[~anchor]]
        cc += [self._cd_i, self._cd_j[~anchor]]
        comp = np.arange(3)
        for slot in range(4):
            rows = np.repeat(self._dp_row, 3)
            cols = (3 * self._dp_nodes[:, slot][:, None] + comp).reshape(-1)
            if slot >= 2:
                keep = np.repeat(~self._dp_has_world, 3)
                rows, cols = rows[keep], cols[keep]
            rr.append(rows)
            cc.append(cols)
        rr = np.concatenate(rr) if rr else np.zeros(0, np.int64)
        cc = np.concatenate(cc) if cc else np.zeros(0, np.int64)
        self.jac = build_rect_pattern(np.stack([rr, cc], 1), m, n)
        # positions of each contribution in the value array
        self._pos_cd_i = self.jac.positions(self._cd_row, self._cd_i) if len(cd) else np.zeros(0, np.int64)
        self._pos_cd_j = self.jac.positions(self._cd_row[~anchor], self._cd_j[~anchor]) \
            if np.any(~anchor) else np.zeros(0, np.int64)
        self._pos_dp = []
        for slot in range(4):
            rows = np.repeat(self._dp_row, 3).reshape(-1, 3)
            cols = 3 * self._dp_nodes[:, slot][:, None] + comp
            pos = np.zeros((len(dp), 3), np.int64)
            # world-vector rows have no second node pair; their slots stay unused
            sel = ~self._dp_has_world if slot >= 2 else np.ones(len(dp), dtype=bool)
            if np.any(sel):
                pos[sel] = self.jac.positions(rows[sel], cols[sel])
            self._pos_dp.append(pos)
        self._frozen = True
        return self

    # ---------------------------------------------------------- evaluation
    def _targets(self, t: float) -> np.ndarray:
        tg = self._cd_static_target.copy()
        for k, f in self._cd_callables:
            tg[k] = float(f(t))
        return tg

    def _dp_vectors(self, q):
        x = q.reshape(-1, 3)
        nd = self._dp_nodes
        a = x[nd[:, 1]] - x[nd[:, 0]]
        b = np.where(self._dp_has_world[:, None], self._dp_world, x[nd[:, 3]] - x[nd[:, 2]])
        return a, b

    def evaluate(self, q, t: float = 0.0, q_base=None, dq=None) -> np.ndarray:
        """Residual vector ``c(q, t)``.

        With ``q = q_base + dq`` given in parts, the coordinate-difference
        rows are formed as ``(q_base - target) + dq`` which keeps small
        increments exact when the coordinates themselves are large.
        """
        self.finalize()
        q = np.asarray(q, dtype=float)
        c = np.zeros(self.m)
        if len(self._cd_row):
            anchor = self._cd_j < 0
            jj = np.where(anchor, 0, self._cd_j)
            if q_base is None or dq is None:
                val = np.where(anchor, q[self._cd_i] - self._targets(t),
                               q[jj] - q[self._cd_i] - self._cd_off)
            else:
                qb, d = np.asarray(q_base, dtype=float), np.asarray(dq, dtype=float)
                val = np.where(anchor, (qb[self._cd_i] - self._targets(t)) + d[self._cd_i],
                               (qb[jj] - qb[self._cd_i] - self._cd_off) + (d[jj] - d[self._cd_i]))
            c[self._cd_row] = val
        if len(self._dp_row):
            a, b = self._dp_vectors(q)
            c[self._dp_row] = np.einsum("ij,ij->i", a, b) - self._dp_c0
        return c

    def jacobian(self, q) -> CsrMatrix:
        """Update and return the fixed-pattern Jacobian ``C_q`` (m x n_dofs)."""
        self.finalize()
        vals = self.jac.values
        vals[:] = 0.0
        if len(self._cd_row):
            anchor = self._cd_j < 0
            np.add.at(vals, self._pos_cd_i, np.where(anchor, 1.0, -1.0))
            np.add.at(vals, self._pos_cd_j, 1.0)
        if len(self._dp_row):
            a, b = self._dp_vectors(np.asarray(q, dtype=float))
            np.add.at(vals, self._pos_dp[0].reshape(-1), (-b).reshape(-1))
            np.add.at(vals, self._pos_dp[1].reshape(-1), b.reshape(-1))
            w = ~self._dp_has_world
            np.add.at(vals, self._pos_dp[2][w].reshape(-1), (-a[w]).reshape(-1))
            np.add.at(vals, self._pos_dp[3][w].reshape(-1), a[w].reshape(-1))
        return self.jac

    def multiplier_update(self, c) -> np.ndarray:
        """Dual ascent ``lam <- lam + rho c``."""
        self.lam += self.rho * np.asarray(c, dtype=float)
        return self.lam

    def hessian_pairs(self) -> np.ndarray:
        """DOF pairs coupled by ``C_q^T C_q`` (for the Hessian pattern)."""
        self.finalize()
        J = self.jac
        out = []
        for r in range(J.n):
            cols = J.indices[J.indptr[r]:J.indptr[r + 1]]
            if len(cols):
                a, b = np.meshgrid(cols, cols, indexing="ij")
                out.append(np.stack([a.ravel(), b.ravel()], 1))
        return np.concatenate(out) if out else np.zeros((0, 2), np.int64)

    # ---------------------------------------------------------- reactions
    def joint_reaction(self, joint: str, h: float, c) -> np.ndarray:
        """Force (N) the child body transmits into the joint, from converged multipliers.

        For each CD row the Newton-unit force is ``h (lam + rho c)``; its
        component index is the row's coordinate.  A body hanging from a
        vertical anchor reports ``-m g`` (its weight acting on the support).
        """
        if self.in_step:
            raise SolverStateError("joint reactions are only defined after a converged step")
        jt = self.joints[joint]
        c = np.asarray(c, dtype=float)
        F = np.zeros(3)
        for r in jt.cd_rows:
            row = self.rows[r]
            F[row.d] += h * (self.lam[r] + self.rho * c[r])
        return F


def add_clamp(cset: ConstraintSet, nodes, X, name: str | None = None, target=None) -> Joint:
    """Pin all three coordinates of ``nodes`` to their reference positions."""
    X = np.asarray(X).reshape(-1, 3)
    rows = []
    for n in np.asarray(nodes, dtype=int):
        for d in range(3):
            tg = X[n, d] if target is None else target(n, d)
            rows.append(CdConstraint("anchor", int(n), d, target=tg))
    return cset.add_joint(name or f"clamp{len(cset.joints)}", rows)


def make_spherical(cset: ConstraintSet, name: str, X, node_b: int, node_a: int | None = None) -> Joint:
    """Point coincidence: three CD rows (anchor to ground when ``node_a`` is None)."""
    X = np.asarray(X).reshape(-1, 3)
    if node_a is None:
        rows = [CdConstraint("anchor", node_b, d, target=float(X[node_b, d])) for d in range(3)]
    else:
        rows = [CdConstraint("pair", node_a, d, node_j=node_b, offset=float(X[node_b, d] - X[node_a, d]))
                for d in range(3)]
    return cset.add_joint(name, rows)


def make_revolute(cset: ConstraintSet, name: str, X, node_b: int, transverse_b, axis_a,
                  node_a: int | None = None) -> Joint:
    """Hinge: spherical rows plus two DP1 axis-alignment rows.

    Parameters
    ----------
    node_b, node_a : int
        Coincident hinge nodes on the child and parent (``None`` = ground).
    transverse_b : two node pairs on the child, spanning the plane normal
        to the hinge axis.
    axis_a : node pair on the parent, or a fixed 3-vector (ground axis).
    """
    X = np.asarray(X).reshape(-1, 3)
    if np.ndim(axis_a) == 1 and len(axis_a) == 3 and not isinstance(axis_a[0], (int, np.integer)):
        axis = np.asarray(axis_a, dtype=float)
        world = True
    else:
        p, qn = (int(k) for k in axis_a)
        axis = X[qn] - X[p]
        world = False
    if np.linalg.norm(axis) < 1e-12:
        raise UsageError(f"joint '{name}': degenerate hinge axis")
    rows = ([CdConstraint("anchor", node_b, d, target=float(X[node_b, d])) for d in range(3)]
            if node_a is None else
            [CdConstraint("pair", node_a, d, node_j=node_b, offset=float(X[node_b, d] - X[node_a, d]))
             for d in range(3)])
    for (t1, t2) in transverse_b:
        tv = X[t2] - X[t1]
        if np.linalg.norm(tv) < 1e-12:
            raise UsageError(f"joint '{name}': degenerate transverse vector")
        c0 = float(np.dot(tv, axis))
        if world:
            rows.append(Dp1Constraint(int(t1), int(t2), world=tuple(axis), c0=c0))
        else:
            rows.append(Dp1Constraint(int(t1), int(t2), p, qn, c0=c0))
    return cset.add_joint(name, rows)
