"""Reference kernels in numpy and plain Python.

Same signatures as the compiled ``_ckernels`` module.  Used when the
extension is unavailable or ``TLFEA_PURE_PYTHON=1`` is set, and as the
oracle the compiled kernels are tested against.
"""
from __future__ import annotations

from types import SimpleNamespace

import numpy as np

from . import materials as mat

IMPLEMENTATION = "python"


def _groups(matrows):
    """Yield (element index array, params namespace) per distinct material row."""
    uniq, inv = np.unique(matrows, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    for k, row in enumerate(uniq):
        idx = np.flatnonzero(inv == k)
        p = SimpleNamespace(lame_lambda=row[0], lame_mu=row[1], C10=row[2], C01=row[3],
                            kappa=row[4], eta_damp=row[5], lambda_damp=row[6],
                            model=mat.SVK if row[7] == 0 else mat.MOONEY_RIVLIN)
        yield idx, p


def stress_batch(x, v, conn, grads, matrows, P, F, with_viscous, add_identity=False):
    """Stage 1: deformation gradient and PK1 stress at every (e, q).

    With ``add_identity`` the array ``x`` holds displacements and
    ``F = I + grad u``, which avoids cancellation against large coordinates.
    Returns ``-1`` on success or the flat slot ``e*nq + q`` of the first
    Mooney-Rivlin point with ``det F <= 0``.
    """
    xe = x[conn]  # (m, 10, 3)
    F[...] = np.einsum("eai,eqaj->eqij", xe, grads)
    H = None
    if add_identity:
        H = F.copy()
        F += np.eye(3)
    nq = grads.shape[1]
    if with_viscous:
        Fd = np.einsum("eai,eqaj->eqij", v[conn], grads)
    for idx, p in _groups(matrows):
        Fi = F[idx]
        if p.model == mat.SVK:
            Pi = mat.pk1_svk(Fi, p) if H is None else mat.pk1_svk_from_grad(H[idx], p)
        else:
            det = np.linalg.det(Fi)
            bad = np.argwhere(~(det > 0.0))
            if bad.size:
                e, q = bad[0]
                return int(idx[e]) * nq + int(q)
            Pi = mat.pk1_mr(Fi, p)
        if with_viscous and (p.eta_damp > 0 or p.lambda_damp > 0):
            Pi = Pi + mat.pk1_viscous(Fi, Fd[idx], p)
        P[idx] = Pi
    return -1


def element_forces(P, grads, j0w):
    """Per-element nodal forces ``f[e, a] = sum_q P grad N_a J0 w``, shape (m, 10, 3)."""
    return np.einsum("eqij,eqaj,eq->eai", P, grads, j0w)


def internal_force(P, grads, j0w, conn, f_out):
    """Stage 2, deterministic: per-element buffer then ordered reduce-by-key."""
    fe = element_forces(P, grads, j0w).reshape(-1, 3)
    keys = conn.reshape(-1)
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    starts = np.flatnonzero(np.r_[True, sk[1:] != sk[:-1]])
    sums = np.add.reduceat(fe[order], starts, axis=0)
    f_out[...] = 0.0
    f_out[sk[starts]] = sums


def hessian_tangent(F, grads, j0w, matrows, pos, scale_el, scale_visc, vals):
    """Add ``scale_el * K_t + scale_visc * K_visc`` element blocks into ``vals``.

    ``pos[e, a, b, d]`` is the value index of DOF entry (3*I_a + d, 3*I_b).
    """
    m, nq = j0w.shape
    Kel = np.zeros((m, 10, 3, 10, 3))
    for idx, p in _groups(matrows):
        Fi = F[idx]
        A = scale_el * mat.tangent(Fi, p)
        if scale_visc != 0.0 and (p.eta_damp > 0 or p.lambda_damp > 0):
            A = A + scale_visc * mat.tangent_viscous(Fi, p)
        Kel[idx] = np.einsum("eqaJ,eqdJfL,eqbL,eq->eadbf", grads[idx], A, grads[idx], j0w[idx])
    idx = pos.transpose(0, 1, 3, 2)[:, :, :, :, None] + np.arange(3)  # (m, a, d, b, e)
    np.add.at(vals, idx.reshape(-1), Kel.reshape(-1))


# ---------------------------------------------------------------- Cholesky

def chol_symbolic(n, Cp, Ci):
    """Elimination tree and column pointers of L for an upper-CSC matrix."""
    parent = np.full(n, -1, dtype=np.int64)
    ancestor = np.full(n, -1, dtype=np.int64)
    Cp_l, Ci_l = Cp.tolist(), Ci.tolist()
    par = parent.tolist()
    anc = ancestor.tolist()
    for k in range(n):
        for p in range(Cp_l[k], Cp_l[k + 1]):
            i = Ci_l[p]
            while i != -1 and i < k:
                inext = anc[i]
                anc[i] = k
                if inext == -1:
                    par[i] = k
                i = inext
    counts = [1] * n
    flag = [-1] * n
    for k in range(n):
        flag[k] = k
        for p in range(Cp_l[k], Cp_l[k + 1]):
            i = Ci_l[p]
            while i < k and flag[i] != k:
                counts[i] += 1
                flag[i] = k
                i = par[i]
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=Lp[1:])
    return np.asarray(par, dtype=np.int64), Lp


def chol_numeric(n, Cp, Ci, Cx, parent, Lp, Li, Lx, work_i, work_x):
    """Up-looking Cholesky; returns -1 or the permuted row of a bad pivot."""
    Cp_l, Ci_l, Cx_l, par, Lp_l = Cp.tolist(), Ci.tolist(), Cx.tolist(), parent.tolist(), Lp.tolist()
    Li_l = [0] * Lp_l[-1]
    Lx_l = [0.0] * Lp_l[-1]
    c = Lp_l[:-1]
    x = [0.0] * n
    flag = [-1] * n
    for k in range(n):
        # nonzero pattern of row k of L via the elimination tree
        pattern = []
        flag[k] = k
        for p in range(Cp_l[k], Cp_l[k + 1]):
            i = Ci_l[p]
            x[i] += Cx_l[p]
            path = []
            while flag[i] != k:
                path.append(i)
                flag[i] = k
                i = par[i]
            pattern.extend(reversed(path))
        # pattern must be processed in topological order
        pattern.sort()
        d = x[k]
        x[k] = 0.0
        for i in pattern:
            lki = x[i] / Lx_l[Lp_l[i]]
            x[i] = 0.0
            for p in range(Lp_l[i] + 1, c[i]):
                x[Li_l[p]] -= Lx_l[p] * lki
            d -= lki * lki
            p = c[i]
            c[i] += 1
            Li_l[p] = k
            Lx_l[p] = lki
        if not d > 0.0:
            return k
        p = c[k]
        c[k] += 1
        Li_l[p] = k
        Lx_l[p] = d ** 0.5
    Li[:] = Li_l
    Lx[:] = Lx_l
    return -1


def chol_solve(n, Lp, Li, Lx, b):
    """In-place ``b <- (L L^T)^{-1} b``."""
    Lp_l, Li_l, Lx_l = Lp.tolist(), Li.tolist(), Lx.tolist()
    y = b.tolist()
    for j in range(n):
        y[j] /= Lx_l[Lp_l[j]]
        yj = y[j]
        for p in range(Lp_l[j] + 1, Lp_l[j + 1]):
            y[Li_l[p]] -= Lx_l[p] * yj
    for j in range(n - 1, -1, -1):
        s = y[j]
        for p in range(Lp_l[j] + 1, Lp_l[j + 1]):
            s -= Lx_l[p] * y[Li_l[p]]
        y[j] = s / Lx_l[Lp_l[j]]
    b[:] = y


# ---------------------------------------------------------- triangle distance

def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def point_triangle_distance(p, a, b, c):
    """Distance from points to triangles (vectorized closest-point test)."""
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = _dot(ab, ap), _dot(ac, ap)
    bp = p - b
    d3, d4 = _dot(ab, bp), _dot(ac, bp)
    cp = p - c
    d5, d6 = _dot(ab, cp), _dot(ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v_in = vb / denom
        w_in = vc / denom
        q = a + v_in[..., None] * ab + w_in[..., None] * ac
        # edge regions
        t_ab = np.clip(d1 / (d1 - d3), 0, 1)
        t_ac = np.clip(d2 / (d2 - d6), 0, 1)
        t_bc = np.clip((d4 - d3) / ((d4 - d3) + (d5 - d6)), 0, 1)
    q = np.where(((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0))[..., None], b + t_bc[..., None] * (c - b), q)
    q = np.where(((vb <= 0) & (d2 >= 0) & (d6 <= 0))[..., None], a + t_ac[..., None] * ac, q)
    q = np.where(((vc <= 0) & (d1 >= 0) & (d3 <= 0))[..., None], a + t_ab[..., None] * ab, q)
    q = np.where(((d6 >= 0) & (d5 <= d6))[..., None], c, q)
    q = np.where(((d3 >= 0) & (d4 <= d3))[..., None], b, q)
    q = np.where(((d1 <= 0) & (d2 <= 0))[..., None], a, q)
    return np.linalg.norm(p - q, axis=-1)


def segment_segment_distance(p1, q1, p2, q2):
    """Distance between segments p1q1 and p2q2 (vectorized)."""
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = _dot(d1, d1), _dot(d2, d2), _dot(d2, r)
    c, b = _dot(d1, r), _dot(d1, d2)
    eps = 1e-300
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-14 * a * e, np.clip((b * f - c * e) / denom, 0, 1), 0.0)
        s = np.where(a <= eps, 0.0, s)
        t = np.where(e <= eps, 0.0, (b * s + f) / np.where(e <= eps, 1.0, e))
        s2a = np.clip(-c / np.where(a <= eps, 1.0, a), 0, 1)
        s2b = np.clip((b - c) / np.where(a <= eps, 1.0, a), 0, 1)
    s = np.where(t < 0, np.where(a <= eps, 0.0, s2a), np.where(t > 1, np.where(a <= eps, 0.0, s2b), s))
    t = np.clip(t, 0, 1)
    return np.linalg.norm(p1 + s[..., None] * d1 - (p2 + t[..., None] * d2), axis=-1)


def _segments_cross_triangle(p, q, a, b, c):
    """True where segment pq intersects triangle abc (non-coplanar case)."""
    n = np.cross(b - a, c - a)
    sp, sq = _dot(p - a, n), _dot(q - a, n)
    straddle = (sp * sq <= 0) & ~((sp == 0) & (sq == 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = sp / (sp - sq)
    x = p + np.nan_to_num(t)[..., None] * (q - p)
    c1 = _dot(np.cross(b - a, x - a), n)
    c2 = _dot(np.cross(c - b, x - b), n)
    c3 = _dot(np.cross(a - c, x - c), n)
    inside = ((c1 >= 0) & (c2 >= 0) & (c3 >= 0)) | ((c1 <= 0) & (c2 <= 0) & (c3 <= 0))
    return straddle & inside


def tri_tri_distance(T1, T2):
    """Exact minimum distance between triangle pairs ``(k,3,3)`` x ``(k,3,3)``."""
    T1 = np.asarray(T1, dtype=np.float64)
    T2 = np.asarray(T2, dtype=np.float64)
    best = np.full(T1.shape[0], np.inf)
    for i in range(3):
        best = np.minimum(best, point_triangle_distance(T1[:, i], T2[:, 0], T2[:, 1], T2[:, 2]))
        best = np.minimum(best, point_triangle_distance(T2[:, i], T1[:, 0], T1[:, 1], T1[:, 2]))
    hit = np.zeros(T1.shape[0], dtype=bool)
    for i in range(3):
        p1, q1 = T1[:, i], T1[:, (i + 1) % 3]
        hit |= _segments_cross_triangle(p1, q1, T2[:, 0], T2[:, 1], T2[:, 2])
        p2, q2 = T2[:, i], T2[:, (i + 1) % 3]
        hit |= _segments_cross_triangle(p2, q2, T1[:, 0], T1[:, 1], T1[:, 2])
        for j in range(3):
            best = np.minimum(best, segment_segment_distance(p1, q1, T2[:, j], T2[:, (j + 1) % 3]))
    best[hit] = 0.0
    return best
