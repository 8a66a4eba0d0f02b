# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.  Signatures match :mod:`tlfea._pykernels`."""
import numpy as np
from libc.math cimport sqrt, cbrt, INFINITY
from libc.stdint cimport int64_t

IMPLEMENTATION = "compiled"


# ------------------------------------------------------------------ 3x3 helpers
# row-major storage: M[3*i + j]

cdef inline double _det(const double* F) noexcept nogil:
    return (F[0] * (F[4] * F[8] - F[5] * F[7])
            - F[1] * (F[3] * F[8] - F[5] * F[6])
            + F[2] * (F[3] * F[7] - F[4] * F[6]))


cdef inline void _invT(const double* F, double det, double* G) noexcept nogil:
    # G = F^{-T}
    cdef double r = 1.0 / det
    G[0] = (F[4] * F[8] - F[5] * F[7]) * r
    G[1] = -(F[3] * F[8] - F[5] * F[6]) * r
    G[2] = (F[3] * F[7] - F[4] * F[6]) * r
    G[3] = -(F[1] * F[8] - F[2] * F[7]) * r
    G[4] = (F[0] * F[8] - F[2] * F[6]) * r
    G[5] = -(F[0] * F[7] - F[1] * F[6]) * r
    G[6] = (F[1] * F[5] - F[2] * F[4]) * r
    G[7] = -(F[0] * F[5] - F[2] * F[3]) * r
    G[8] = (F[0] * F[4] - F[1] * F[3]) * r


cdef inline void _AtB(const double* A, const double* B, double* C) noexcept nogil:
    cdef int i, j, k
    cdef double s
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                s += A[3 * k + i] * B[3 * k + j]
            C[3 * i + j] = s


cdef inline void _AB(const double* A, const double* B, double* C) noexcept nogil:
    cdef int i, j, k
    cdef double s
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                s += A[3 * i + k] * B[3 * k + j]
            C[3 * i + j] = s


cdef inline void _ABt(const double* A, const double* B, double* C) noexcept nogil:
    cdef int i, j, k
    cdef double s
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                s += A[3 * i + k] * B[3 * j + k]
            C[3 * i + j] = s


cdef inline void _svk_pk1(const double* F, double lam, double mu, double* P) noexcept nogil:
    cdef double C[9]
    cdef double S[9]
    cdef double trE
    cdef int i
    _AtB(F, F, C)
    trE = 0.5 * (C[0] + C[4] + C[8] - 3.0)
    for i in range(9):
        S[i] = mu * C[i]
    S[0] += lam * trE - mu
    S[4] += lam * trE - mu
    S[8] += lam * trE - mu
    _AB(F, S, P)


cdef inline void _svk_pk1_grad(const double* H, double lam, double mu, double* P) noexcept nogil:
    # strain (H + H^T + H^T H)/2 without cancellation against the identity
    cdef double C[9]
    cdef double S[9]
    cdef double trE
    cdef int i, j
    _AtB(H, H, C)
    for i in range(3):
        for j in range(3):
            S[3 * i + j] = mu * (H[3 * i + j] + H[3 * j + i] + C[3 * i + j])
    trE = 0.5 * (2.0 * (H[0] + H[4] + H[8]) + C[0] + C[4] + C[8])
    S[0] += lam * trE
    S[4] += lam * trE
    S[8] += lam * trE
    _AB(H, S, P)
    for i in range(9):
        P[i] += S[i]


cdef inline int _mr_pk1(const double* F, double c10, double c01, double kappa, double* P) noexcept nogil:
    cdef double J = _det(F)
    cdef double G[9]
    cdef double C[9]
    cdef double FC[9]
    cdef double I1, I2, trC2, a, b, t1, t2, t3
    cdef int i, j
    if not (J > 0.0):
        return 1
    _invT(F, J, G)
    _AtB(F, F, C)
    _AB(F, C, FC)
    I1 = C[0] + C[4] + C[8]
    trC2 = 0.0
    for i in range(3):
        for j in range(3):
            trC2 += C[3 * i + j] * C[3 * j + i]
    I2 = 0.5 * (I1 * I1 - trC2)
    a = 1.0 / cbrt(J)
    a = a * a
    b = a * a
    t3 = kappa * (J - 1.0) * J
    for i in range(9):
        P[i] = c10 * a * (2.0 * F[i] - (2.0 / 3.0) * I1 * G[i]) \
            + c01 * b * (2.0 * I1 * F[i] - 2.0 * FC[i] - (4.0 / 3.0) * I2 * G[i]) + t3 * G[i]
    return 0


cdef inline void _visc_pk1_add(const double* F, const double* Fd, double eta, double lamd,
                               double* P) noexcept nogil:
    cdef double A[9]
    cdef double S[9]
    cdef double Q[9]
    cdef double tr
    cdef int i, j
    _AtB(Fd, F, A)  # Fd^T F
    for i in range(3):
        for j in range(3):
            S[3 * i + j] = eta * (A[3 * i + j] + A[3 * j + i])
    tr = A[0] + A[4] + A[8]
    S[0] += lamd * tr
    S[4] += lamd * tr
    S[8] += lamd * tr
    _AB(F, S, Q)
    for i in range(9):
        P[i] += Q[i]


def stress_batch(const double[:, ::1] x, const double[:, ::1] v, const int64_t[:, ::1] conn,
                 const double[:, :, :, ::1] grads, const double[:, ::1] matrows,
                 double[:, :, :, ::1] P, double[:, :, :, ::1] F, bint with_viscous,
                 bint add_identity=False):
    cdef Py_ssize_t m = conn.shape[0], nq = grads.shape[1]
    cdef Py_ssize_t e, q, a, i, j, node
    cdef double Fl[9]
    cdef double Fd[9]
    cdef double Pl[9]
    cdef double g
    cdef int model, bad = -1
    with nogil:
        for e in range(m):
            model = <int> matrows[e, 7]
            for q in range(nq):
                for i in range(9):
                    Fl[i] = 0.0
                    Fd[i] = 0.0
                for a in range(10):
                    node = conn[e, a]
                    for j in range(3):
                        g = grads[e, q, a, j]
                        for i in range(3):
                            Fl[3 * i + j] += x[node, i] * g
                            if with_viscous:
                                Fd[3 * i + j] += v[node, i] * g
                if add_identity:
                    if model == 0:
                        _svk_pk1_grad(Fl, matrows[e, 0], matrows[e, 1], Pl)
                    Fl[0] += 1.0
                    Fl[4] += 1.0
                    Fl[8] += 1.0
                elif model == 0:
                    _svk_pk1(Fl, matrows[e, 0], matrows[e, 1], Pl)
                if model != 0:
                    if _mr_pk1(Fl, matrows[e, 2], matrows[e, 3], matrows[e, 4], Pl):
                        bad = <int> (e * nq + q)
                        break
                if with_viscous and (matrows[e, 5] > 0.0 or matrows[e, 6] > 0.0):
                    _visc_pk1_add(Fl, Fd, matrows[e, 5], matrows[e, 6], Pl)
                for i in range(3):
                    for j in range(3):
                        P[e, q, i, j] = Pl[3 * i + j]
                        F[e, q, i, j] = Fl[3 * i + j]
            if bad >= 0:
                break
    return bad


def internal_force(const double[:, :, :, ::1] P, const double[:, :, :, ::1] grads,
                   const double[:, ::1] j0w, const int64_t[:, ::1] conn, double[:, ::1] f_out):
    """Element-ordered accumulation (each node sums its elements in index order)."""
    cdef Py_ssize_t m = conn.shape[0], nq = grads.shape[1]
    cdef Py_ssize_t e, q, a, i, j, node
    cdef double fa[3]
    cdef double s, w
    with nogil:
        f_out[:, :] = 0.0
        for e in range(m):
            for a in range(10):
                fa[0] = 0.0
                fa[1] = 0.0
                fa[2] = 0.0
                for q in range(nq):
                    w = j0w[e, q]
                    for i in range(3):
                        s = 0.0
                        for j in range(3):
                            s += P[e, q, i, j] * grads[e, q, a, j]
                        fa[i] += s * w
                node = conn[e, a]
                for i in range(3):
                    f_out[node, i] += fa[i]


cdef inline Py_ssize_t _ix(int i, int J, int k, int L) noexcept nogil:
    return ((i * 3 + J) * 3 + k) * 3 + L


cdef void _svk_tangent(const double* F, double lam, double mu, double s, double* A) noexcept nogil:
    cdef double C[9]
    cdef double S[9]
    cdef double B[9]
    cdef double trE
    cdef int i, J, k, L
    _AtB(F, F, C)
    _ABt(F, F, B)
    trE = 0.5 * (C[0] + C[4] + C[8] - 3.0)
    for i in range(9):
        S[i] = mu * C[i]
    S[0] += lam * trE - mu
    S[4] += lam * trE - mu
    S[8] += lam * trE - mu
    for i in range(3):
        for J in range(3):
            for k in range(3):
                for L in range(3):
                    A[_ix(i, J, k, L)] += s * (
                        (S[3 * J + L] if i == k else 0.0)
                        + lam * F[3 * i + J] * F[3 * k + L]
                        + mu * F[3 * i + L] * F[3 * k + J]
                        + (mu * B[3 * i + k] if J == L else 0.0))


cdef void _mr_tangent(const double* F, double c10, double c01, double kappa, double s,
                      double* A) noexcept nogil:
    cdef double J = _det(F)
    cdef double G[9]
    cdef double C[9]
    cdef double B[9]
    cdef double FC[9]
    cdef double T1[9]
    cdef double T2[9]
    cdef double dI2[9]
    cdef double I1, I2, trC2, a, b, ka, kb, kc, kd, dd, dJL, val
    cdef int i, Jj, k, L, r
    _invT(F, J, G)
    _AtB(F, F, C)
    _ABt(F, F, B)
    _AB(F, C, FC)
    I1 = C[0] + C[4] + C[8]
    trC2 = 0.0
    for i in range(3):
        for k in range(3):
            trC2 += C[3 * i + k] * C[3 * k + i]
    I2 = 0.5 * (I1 * I1 - trC2)
    a = 1.0 / cbrt(J)
    a = a * a
    b = a * a
    for r in range(9):
        T1[r] = 2.0 * F[r] - (2.0 / 3.0) * I1 * G[r]
        T2[r] = 2.0 * I1 * F[r] - 2.0 * FC[r] - (4.0 / 3.0) * I2 * G[r]
        dI2[r] = 2.0 * (I1 * F[r] - FC[r])
    ka = c10 * a
    kb = c01 * b
    kc = kappa * (2.0 * J * J - J)
    kd = kappa * (J * J - J)
    for i in range(3):
        for Jj in range(3):
            for k in range(3):
                for L in range(3):
                    dd = 1.0 if (i == k and Jj == L) else 0.0
                    dJL = 1.0 if Jj == L else 0.0
                    val = ka * (-(2.0 / 3.0) * T1[3 * i + Jj] * G[3 * k + L] + 2.0 * dd
                                - (4.0 / 3.0) * G[3 * i + Jj] * F[3 * k + L]
                                + (2.0 / 3.0) * I1 * G[3 * i + L] * G[3 * k + Jj])
                    val += kb * (-(4.0 / 3.0) * T2[3 * i + Jj] * G[3 * k + L]
                                 + 4.0 * F[3 * i + Jj] * F[3 * k + L] + 2.0 * I1 * dd
                                 - 2.0 * ((C[3 * L + Jj] if i == k else 0.0)
                                          + F[3 * i + L] * F[3 * k + Jj] + B[3 * i + k] * dJL)
                                 - (4.0 / 3.0) * G[3 * i + Jj] * dI2[3 * k + L]
                                 + (4.0 / 3.0) * I2 * G[3 * i + L] * G[3 * k + Jj])
                    val += kc * G[3 * i + Jj] * G[3 * k + L] - kd * G[3 * i + L] * G[3 * k + Jj]
                    A[_ix(i, Jj, k, L)] += s * val


cdef void _visc_tangent(const double* F, double eta, double lamd, double s, double* A) noexcept nogil:
    cdef double B[9]
    cdef int i, J, k, L
    _ABt(F, F, B)
    for i in range(3):
        for J in range(3):
            for k in range(3):
                for L in range(3):
                    A[_ix(i, J, k, L)] += s * (
                        eta * ((B[3 * i + k] if J == L else 0.0) + F[3 * i + L] * F[3 * k + J])
                        + lamd * F[3 * i + J] * F[3 * k + L])


def hessian_tangent(const double[:, :, :, ::1] F, const double[:, :, :, ::1] grads,
                    const double[:, ::1] j0w, const double[:, ::1] matrows,
                    const int64_t[:, :, :, ::1] pos, double scale_el, double scale_visc,
                    double[::1] vals):
    cdef Py_ssize_t m = grads.shape[0], nq = grads.shape[1]
    cdef Py_ssize_t e, q, a, b, d, f, J, L, r
    cdef double A[81]
    cdef double Fl[9]
    cdef double T[810]   # T[d, J, b, f] = sum_L A[d,J,f,L] G[b,L]
    cdef double K[900]   # K[a, d, b, f]
    cdef double s, w
    cdef bint visc
    with nogil:
        for e in range(m):
            for r in range(900):
                K[r] = 0.0
            visc = scale_visc != 0.0 and (matrows[e, 5] > 0.0 or matrows[e, 6] > 0.0)
            for q in range(nq):
                for r in range(81):
                    A[r] = 0.0
                for r in range(9):
                    Fl[r] = F[e, q, r // 3, r % 3]
                if matrows[e, 7] == 0:
                    _svk_tangent(Fl, matrows[e, 0], matrows[e, 1], scale_el, A)
                else:
                    _mr_tangent(Fl, matrows[e, 2], matrows[e, 3], matrows[e, 4], scale_el, A)
                if visc:
                    _visc_tangent(Fl, matrows[e, 5], matrows[e, 6], scale_visc, A)
                w = j0w[e, q]
                for d in range(3):
                    for J in range(3):
                        for b in range(10):
                            for f in range(3):
                                s = 0.0
                                for L in range(3):
                                    s += A[_ix(d, J, f, L)] * grads[e, q, b, L]
                                T[((d * 3 + J) * 10 + b) * 3 + f] = s * w
                for a in range(10):
                    for d in range(3):
                        for b in range(10):
                            for f in range(3):
                                s = 0.0
                                for J in range(3):
                                    s += grads[e, q, a, J] * T[((d * 3 + J) * 10 + b) * 3 + f]
                                K[((a * 3 + d) * 10 + b) * 3 + f] += s
            for a in range(10):
                for b in range(10):
                    for d in range(3):
                        r = pos[e, a, b, d]
                        for f in range(3):
                            vals[r + f] += K[((a * 3 + d) * 10 + b) * 3 + f]


# ------------------------------------------------------------------ Cholesky

def chol_symbolic(Py_ssize_t n, const int64_t[::1] Cp, const int64_t[::1] Ci):
    parent_a = np.full(n, -1, dtype=np.int64)
    anc_a = np.full(n, -1, dtype=np.int64)
    counts_a = np.ones(n, dtype=np.int64)
    flag_a = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] parent = parent_a, anc = anc_a, counts = counts_a, flag = flag_a
    cdef Py_ssize_t k, p, i, inext
    with nogil:
        for k in range(n):
            for p in range(Cp[k], Cp[k + 1]):
                i = Ci[p]
                while i != -1 and i < k:
                    inext = anc[i]
                    anc[i] = k
                    if inext == -1:
                        parent[i] = k
                    i = inext
        for k in range(n):
            flag[k] = k
            for p in range(Cp[k], Cp[k + 1]):
                i = Ci[p]
                while i < k and flag[i] != k:
                    counts[i] += 1
                    flag[i] = k
                    i = parent[i]
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts_a, out=Lp[1:])
    return parent_a, Lp


def chol_numeric(Py_ssize_t n, const int64_t[::1] Cp, const int64_t[::1] Ci, const double[::1] Cx,
                 const int64_t[::1] parent, const int64_t[::1] Lp, int64_t[::1] Li, double[::1] Lx,
                 int64_t[::1] work_i, double[::1] x):
    """Up-looking Cholesky into preallocated storage; returns -1 or the bad row."""
    cdef int64_t* flag = &work_i[0]
    cdef int64_t* s = &work_i[n]
    cdef int64_t* c = &work_i[2 * n]
    cdef Py_ssize_t k, p, i, top, ln, t
    cdef double d, lki
    cdef int64_t bad = -1
    with nogil:
        for k in range(n):
            c[k] = Lp[k]
            flag[k] = -1
            x[k] = 0.0
        for k in range(n):
            top = n
            flag[k] = k
            for p in range(Cp[k], Cp[k + 1]):
                i = Ci[p]
                x[i] += Cx[p]
                ln = 0
                while flag[i] != k:
                    s[ln] = i
                    ln += 1
                    flag[i] = k
                    i = parent[i]
                while ln > 0:
                    ln -= 1
                    top -= 1
                    s[top] = s[ln]
            d = x[k]
            x[k] = 0.0
            for t in range(top, n):
                i = s[t]
                lki = x[i] / Lx[Lp[i]]
                x[i] = 0.0
                for p in range(Lp[i] + 1, c[i]):
                    x[Li[p]] -= Lx[p] * lki
                d -= lki * lki
                p = c[i]
                c[i] += 1
                Li[p] = k
                Lx[p] = lki
            if not (d > 0.0):
                bad = k
                break
            p = c[k]
            c[k] += 1
            Li[p] = k
            Lx[p] = sqrt(d)
    return bad


def chol_solve(Py_ssize_t n, const int64_t[::1] Lp, const int64_t[::1] Li, const double[::1] Lx,
               double[::1] b):
    cdef Py_ssize_t j, p
    cdef double yj
    with nogil:
        for j in range(n):
            b[j] /= Lx[Lp[j]]
            yj = b[j]
            for p in range(Lp[j] + 1, Lp[j + 1]):
                b[Li[p]] -= Lx[p] * yj
        for j in range(n - 1, -1, -1):
            yj = b[j]
            for p in range(Lp[j] + 1, Lp[j + 1]):
                yj -= Lx[p] * b[Li[p]]
            b[j] = yj / Lx[Lp[j]]


# --------------------------------------------------------- triangle distance

cdef inline double _d3(const double* a, const double* b) noexcept nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef double _pt_tri(const double* p, const double* a, const double* b, const double* c) noexcept nogil:
    cdef double ab[3]
    cdef double ac[3]
    cdef double ap[3]
    cdef double bp[3]
    cdef double cp[3]
    cdef double q[3]
    cdef double d1, d2, d3, d4, d5, d6, va, vb, vc, v, w, den, r
    cdef int i
    for i in range(3):
        ab[i] = b[i] - a[i]
        ac[i] = c[i] - a[i]
        ap[i] = p[i] - a[i]
        bp[i] = p[i] - b[i]
        cp[i] = p[i] - c[i]
    d1 = _d3(ab, ap)
    d2 = _d3(ac, ap)
    if d1 <= 0 and d2 <= 0:
        for i in range(3):
            q[i] = a[i]
    else:
        d3 = _d3(ab, bp)
        d4 = _d3(ac, bp)
        d5 = _d3(ab, cp)
        d6 = _d3(ac, cp)
        vc = d1 * d4 - d3 * d2
        vb = d5 * d2 - d1 * d6
        va = d3 * d6 - d5 * d4
        if d3 >= 0 and d4 <= d3:
            for i in range(3):
                q[i] = b[i]
        elif d6 >= 0 and d5 <= d6:
            for i in range(3):
                q[i] = c[i]
        elif vc <= 0 and d1 >= 0 and d3 <= 0:
            v = d1 / (d1 - d3)
            for i in range(3):
                q[i] = a[i] + v * ab[i]
        elif vb <= 0 and d2 >= 0 and d6 <= 0:
            w = d2 / (d2 - d6)
            for i in range(3):
                q[i] = a[i] + w * ac[i]
        elif va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
            w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
            for i in range(3):
                q[i] = b[i] + w * (c[i] - b[i])
        else:
            den = 1.0 / (va + vb + vc)
            v = vb * den
            w = vc * den
            for i in range(3):
                q[i] = a[i] + ab[i] * v + ac[i] * w
    r = 0.0
    for i in range(3):
        r += (p[i] - q[i]) * (p[i] - q[i])
    return sqrt(r)


cdef inline double _clamp01(double t) noexcept nogil:
    if t < 0.0:
        return 0.0
    if t > 1.0:
        return 1.0
    return t


cdef double _seg_seg(const double* p1, const double* q1, const double* p2, const double* q2) noexcept nogil:
    cdef double d1[3]
    cdef double d2[3]
    cdef double r[3]
    cdef double a, e, f, c, b, den, s, t, out
    cdef int i
    for i in range(3):
        d1[i] = q1[i] - p1[i]
        d2[i] = q2[i] - p2[i]
        r[i] = p1[i] - p2[i]
    a = _d3(d1, d1)
    e = _d3(d2, d2)
    f = _d3(d2, r)
    if a <= 1e-300 and e <= 1e-300:
        s = 0.0
        t = 0.0
    elif a <= 1e-300:
        s = 0.0
        t = _clamp01(f / e)
    else:
        c = _d3(d1, r)
        if e <= 1e-300:
            t = 0.0
            s = _clamp01(-c / a)
        else:
            b = _d3(d1, d2)
            den = a * e - b * b
            if den > 1e-14 * a * e:
                s = _clamp01((b * f - c * e) / den)
            else:
                s = 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = _clamp01(-c / a)
            elif t > 1.0:
                t = 1.0
                s = _clamp01((b - c) / a)
    out = 0.0
    for i in range(3):
        out += (p1[i] + s * d1[i] - p2[i] - t * d2[i]) ** 2
    return sqrt(out)


cdef bint _seg_cross_tri(const double* p, const double* q, const double* a, const double* b,
                         const double* c) noexcept nogil:
    cdef double n[3]
    cdef double u[3]
    cdef double w[3]
    cdef double x[3]
    cdef double e[3]
    cdef double f[3]
    cdef double sp, sq, t, c1, c2, c3
    cdef int i
    for i in range(3):
        u[i] = b[i] - a[i]
        w[i] = c[i] - a[i]
    n[0] = u[1] * w[2] - u[2] * w[1]
    n[1] = u[2] * w[0] - u[0] * w[2]
    n[2] = u[0] * w[1] - u[1] * w[0]
    sp = 0.0
    sq = 0.0
    for i in range(3):
        sp += (p[i] - a[i]) * n[i]
        sq += (q[i] - a[i]) * n[i]
    if sp * sq > 0.0 or (sp == 0.0 and sq == 0.0):
        return False
    t = sp / (sp - sq)
    for i in range(3):
        x[i] = p[i] + t * (q[i] - p[i])
    # edge tests: ((v1 - v0) x (x - v0)) . n
    for i in range(3):
        e[i] = b[i] - a[i]
        f[i] = x[i] - a[i]
    c1 = (e[1] * f[2] - e[2] * f[1]) * n[0] + (e[2] * f[0] - e[0] * f[2]) * n[1] + (e[0] * f[1] - e[1] * f[0]) * n[2]
    for i in range(3):
        e[i] = c[i] - b[i]
        f[i] = x[i] - b[i]
    c2 = (e[1] * f[2] - e[2] * f[1]) * n[0] + (e[2] * f[0] - e[0] * f[2]) * n[1] + (e[0] * f[1] - e[1] * f[0]) * n[2]
    for i in range(3):
        e[i] = a[i] - c[i]
        f[i] = x[i] - c[i]
    c3 = (e[1] * f[2] - e[2] * f[1]) * n[0] + (e[2] * f[0] - e[0] * f[2]) * n[1] + (e[0] * f[1] - e[1] * f[0]) * n[2]
    return (c1 >= 0 and c2 >= 0 and c3 >= 0) or (c1 <= 0 and c2 <= 0 and c3 <= 0)


def tri_tri_distance(const double[:, :, ::1] T1, const double[:, :, ::1] T2):
    cdef Py_ssize_t k = T1.shape[0], t
    cdef int i, j
    out_a = np.empty(k)
    cdef double[::1] out = out_a
    cdef double best, d
    with nogil:
        for t in range(k):
            best = INFINITY
            for i in range(3):
                if (_seg_cross_tri(&T1[t, i, 0], &T1[t, (i + 1) % 3, 0], &T2[t, 0, 0], &T2[t, 1, 0], &T2[t, 2, 0])
                        or _seg_cross_tri(&T2[t, i, 0], &T2[t, (i + 1) % 3, 0], &T1[t, 0, 0], &T1[t, 1, 0], &T1[t, 2, 0])):
                    best = 0.0
                    break
            if best > 0.0:
                for i in range(3):
                    d = _pt_tri(&T1[t, i, 0], &T2[t, 0, 0], &T2[t, 1, 0], &T2[t, 2, 0])
                    if d < best:
                        best = d
                    d = _pt_tri(&T2[t, i, 0], &T1[t, 0, 0], &T1[t, 1, 0], &T1[t, 2, 0])
                    if d < best:
                        best = d
                    for j in range(3):
                        d = _seg_seg(&T1[t, i, 0], &T1[t, (i + 1) % 3, 0], &T2[t, j, 0], &T2[t, (j + 1) % 3, 0])
                        if d < best:
                            best = d
            out[t] = best
    return out_a
