"""Reference-configuration quantities computed once per mesh.

T10 shape functions, tetrahedral quadrature, reference shape gradients,
Jacobian determinants and the consistent mass matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import T10_EDGES, Mesh
from .errors import InvertedElementError, StructuralError, UsageError


@dataclass(frozen=True)
class QuadratureRule:
    """Points in parent coordinates ``(xi, eta, zeta)`` and weights."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.weights)


def _bary(xi):
    xi = np.asarray(xi, dtype=np.float64)
    return np.array([1.0 - xi[0] - xi[1] - xi[2], xi[0], xi[1], xi[2]])


def t10_shape(xi) -> np.ndarray:
    """The ten quadratic basis functions evaluated at ``xi``."""
    z = _bary(xi)
    N = np.empty(10)
    N[:4] = z * (2.0 * z - 1.0)
    for k, (a, b) in enumerate(T10_EDGES):
        N[4 + k] = 4.0 * z[a] * z[b]
    return N


# d(zeta_i)/d(xi, eta, zeta) for the four barycentric coordinates
_DZ = np.array([[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def t10_shape_grad(xi) -> np.ndarray:
    """Parent-domain gradients, shape (10, 3)."""
    z = _bary(xi)
    G = np.empty((10, 3))
    G[:4] = (4.0 * z - 1.0)[:, None] * _DZ
    for k, (a, b) in enumerate(T10_EDGES):
        G[4 + k] = 4.0 * (z[a] * _DZ[b] + z[b] * _DZ[a])
    return G


def _from_bary(rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    return rows[:, 1:4].copy()


def keast5() -> QuadratureRule:
    """Five-point degree-3 rule with a negative centroid weight."""
    pts = [[0.25, 0.25, 0.25, 0.25]]
    for k in range(4):
        b = [1.0 / 6.0] * 4
        b[k] = 0.5
        pts.append(b)
    w = np.array([-0.8 / 6.0] + [0.45 / 6.0] * 4)
    return QuadratureRule(_from_bary(pts), w)


def tet14() -> QuadratureRule:
    """Fourteen-point degree-5 rule with positive weights (for the mass)."""
    pts, w = [], []
    for a, wt in ((0.0927352503108912, 0.01224884051939366), (0.3108859192633006, 0.01878132095300264)):
        b = 1.0 - 3.0 * a
        for k in range(4):
            z = [a] * 4
            z[k] = b
            pts.append(z)
            w.append(wt)
    a, b = 0.4544962958743504, 0.0455037041256496
    for i in range(4):
        for j in range(i + 1, 4):
            z = [b] * 4
            z[i] = a
            z[j] = a
            pts.append(z)
            w.append(0.007091003462846911)
    return QuadratureRule(_from_bary(pts), np.array(w))


@dataclass
class ElementPrecomp:
    """Per-(element, quadrature point) gradients and Jacobians, per-element mass.

    ``grads[e, q]`` is the (10, 3) array of material gradients, ``j0w[e, q]``
    is ``det J * w_q`` (the integration weight in reference volume).
    """

    rule: QuadratureRule
    grads: np.ndarray  # (m, nq, 10, 3)
    j0: np.ndarray  # (m, nq)
    j0w: np.ndarray  # (m, nq)
    mass_coeffs: np.ndarray  # (m, 10, 10)
    volumes: np.ndarray  # (m,)

    @property
    def n_elements(self) -> int:
        return self.grads.shape[0]

    @property
    def n_qp(self) -> int:
        return self.grads.shape[1]


def _densities_per_element(mesh: Mesh, density) -> np.ndarray:
    if np.isscalar(density):
        return np.full(mesh.n_elements, float(density))
    if isinstance(density, dict):
        eb = mesh.element_body()
        return np.array([float(density[int(b)]) for b in eb])
    rho = np.asarray(density, dtype=np.float64).reshape(-1)
    if rho.size != mesh.n_elements:
        raise UsageError("density array must have one entry per element")
    return rho


def precompute_elements(mesh: Mesh, density, rule: QuadratureRule | None = None,
                        mass_exact: bool = True) -> ElementPrecomp:
    """Reference gradients, Jacobians and element mass matrices.

    Parameters
    ----------
    mesh : Mesh
    density : float, dict body->float, or per-element array
        Reference mass density in kg/m^3.
    rule : QuadratureRule, optional
        Force/stiffness rule, :func:`keast5` by default.
    mass_exact : bool
        Integrate the mass with :func:`tet14` (exact for the quadratic
        product) instead of ``rule``.
    """
    rule = rule or keast5()
    rho = _densities_per_element(mesh, density)
    X = mesh.nodes[mesh.elements]  # (m, 10, 3)
    dN = np.stack([t10_shape_grad(p) for p in rule.points])  # (nq, 10, 3)
    # J[e,q,i,j] = sum_a X[e,a,i] dN[q,a,j]
    J = np.einsum("eai,qaj->eqij", X, dN)
    j0 = np.linalg.det(J)
    bad = np.argwhere(~(j0 > 0.0))
    if bad.size:
        e, q = (int(v) for v in bad[0])
        raise InvertedElementError(
            f"element {e} has non-positive reference Jacobian {j0[e, q]:.3e} at point {q}", e, q)
    Jinv = np.linalg.inv(J)
    # grad_X N_a = dN_a/dxi . J^{-1}
    grads = np.einsum("qak,eqkj->eqaj", dN, Jinv)
    j0w = j0 * rule.weights[None, :]

    mrule = tet14() if mass_exact else rule
    Nm = np.stack([t10_shape(p) for p in mrule.points])  # (nqm, 10)
    dNm = np.stack([t10_shape_grad(p) for p in mrule.points])
    Jm = np.einsum("eai,qaj->eqij", X, dNm)
    jm = np.linalg.det(Jm) * mrule.weights[None, :]
    mass = np.einsum("e,eq,qa,qb->eab", rho, jm, Nm, Nm)
    mass = 0.5 * (mass + mass.transpose(0, 2, 1))
    volumes = j0w.sum(axis=1) if not mass_exact else jm.sum(axis=1)
    return ElementPrecomp(rule, np.ascontiguousarray(grads), j0, np.ascontiguousarray(j0w),
                          np.ascontiguousarray(mass), volumes)


def assemble_mass(precomp: ElementPrecomp, elements: np.ndarray, pattern):
    """Coefficient-level consistent mass on a given CSR pattern."""
    from .sparse import CsrMatrix, element_positions

    pos = element_positions(pattern, elements)
    vals = np.zeros(pattern.nnz)
    np.add.at(vals, pos.reshape(-1), precomp.mass_coeffs.reshape(-1))
    if np.any(pos < 0):  # pragma: no cover - element_positions raises first
        raise StructuralError("element pair absent from mass pattern")
    return CsrMatrix(pattern.n, pattern.indptr, pattern.indices, vals)


def gravity_force(M, gravity) -> np.ndarray:
    """Body-force vector ``f_ff[3I+d] = g_d * sum_J M_IJ``."""
    rows = M.row_sums()
    g = np.asarray(gravity, dtype=np.float64)
    return (rows[:, None] * g[None, :]).reshape(-1)
