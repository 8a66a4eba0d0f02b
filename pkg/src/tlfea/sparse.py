"""Fixed-pattern CSR operators and a direct SPD solver.

The solver follows an analyze / factorize / refactorize / solve lifecycle:
the fill-reducing ordering and the symbolic factor are built once per
pattern, and later numeric factorizations reuse every allocation.
"""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg.lapack as lapack
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from . import kernels
from .errors import (NotPositiveDefiniteError, SolverStateError, StructuralError,
                     UsageError)

log = logging.getLogger(__name__)

_SHIFT = np.int64(32)
_MAXIDX = 1 << 32

#: Below this many rows the solver switches to a dense LAPACK Cholesky.
DENSE_THRESHOLD = 600


class CsrMatrix:
    """Compressed-sparse-row matrix with an immutable structure.

    Square unless ``n_cols`` is given (the constraint Jacobian is not).
    ``indptr`` (offsets) and ``indices`` (columns, ascending per row) are
    made read-only at construction; ``values`` may be overwritten in place.
    """

    def __init__(self, n: int, indptr, indices, values=None, n_cols: int | None = None):
        self.n = int(n)
        self.n_cols = self.n if n_cols is None else int(n_cols)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.indptr.flags.writeable = False
        self.indices.flags.writeable = False
        if values is None:
            values = np.zeros(len(self.indices))
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        if len(self.indptr) != self.n + 1 or self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise UsageError("inconsistent CSR offsets")
        if len(self.values) != len(self.indices):
            raise UsageError("values and columns differ in length")
        self._scipy = None

    # aliases matching the textbook field names
    @property
    def offsets(self) -> np.ndarray:
        return self.indptr

    @property
    def columns(self) -> np.ndarray:
        return self.indices

    @property
    def n_rows(self) -> int:
        return self.n

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def row_of_entry(self) -> np.ndarray:
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))

    def keys(self) -> np.ndarray:
        """Sorted 64-bit keys ``row * 2**32 + col`` of the stored entries."""
        return (self.row_of_entry() << _SHIFT) + self.indices

    def with_values(self, values) -> "CsrMatrix":
        """New matrix sharing this structure (same offset/column objects)."""
        out = CsrMatrix.__new__(CsrMatrix)
        out.n, out.n_cols, out.indptr, out.indices = self.n, self.n_cols, self.indptr, self.indices
        out.values = np.ascontiguousarray(values, dtype=np.float64)
        if out.values.shape != (self.nnz,):
            raise UsageError("values length must equal nnz")
        out._scipy = None
        return out

    def zeros_like(self) -> "CsrMatrix":
        return self.with_values(np.zeros(self.nnz))

    def to_scipy(self) -> sp.csr_matrix:
        s = self._scipy
        if s is None or s.data is not self.values:
            s = sp.csr_matrix((self.values, self.indices, self.indptr), shape=(self.n, self.n_cols), copy=False)
            self._scipy = s
        return s

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.row_of_entry(), weights=self.values, minlength=self.n)

    def diagonal_positions(self) -> np.ndarray:
        """Index into ``values`` of every diagonal entry; -1 if missing."""
        keys = self.keys()
        q = (np.arange(self.n, dtype=np.int64) << _SHIFT) + np.arange(self.n, dtype=np.int64)
        pos = np.searchsorted(keys, q)
        pos = np.minimum(pos, max(self.nnz - 1, 0))
        ok = keys[pos] == q if self.nnz else np.zeros(self.n, bool)
        return np.where(ok, pos, -1)

    def positions(self, rows, cols) -> np.ndarray:
        """Index of each ``(row, col)`` entry in ``values``; raises if absent."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        keys = self.keys()
        q = (rows << _SHIFT) + cols
        pos = np.searchsorted(keys, q.reshape(-1))
        pos = np.minimum(pos, self.nnz - 1)
        bad = keys[pos] != q.reshape(-1)
        if bad.any():
            k = int(np.argmax(bad))
            raise StructuralError(
                f"entry ({int(rows.reshape(-1)[k])}, {int(cols.reshape(-1)[k])}) is not in the pattern")
        return pos.reshape(q.shape)

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.values))


def build_pattern(index_pairs, n_rows: int) -> CsrMatrix:
    """CSR structure of the symmetric closure of ``index_pairs``.

    Each pair is encoded as the key ``row * 2**32 + col``; the builder adds
    the mirrored key, sorts, deduplicates and prefix-sums the row counts.
    """
    pairs = np.asarray(index_pairs, dtype=np.int64).reshape(-1, 2)
    if n_rows >= _MAXIDX or (pairs.size and (pairs.min() < 0 or pairs.max() >= _MAXIDX)):
        raise UsageError("index does not fit in 32 bits")
    if pairs.size and pairs.max() >= n_rows:
        raise UsageError("index pair exceeds the number of rows")
    r, c = pairs[:, 0], pairs[:, 1]
    keys = np.concatenate([(r << _SHIFT) + c, (c << _SHIFT) + r])
    keys = np.unique(keys)
    rows = keys >> _SHIFT
    cols = keys & np.int64(_MAXIDX - 1)
    offsets = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_rows), out=offsets[1:])
    return CsrMatrix(n_rows, offsets, cols)


def build_rect_pattern(index_pairs, n_rows: int, n_cols: int) -> CsrMatrix:
    """CSR structure of a rectangular operator (no mirroring)."""
    pairs = np.asarray(index_pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs[:, 0].max() >= n_rows or pairs[:, 1].max() >= n_cols):
        raise UsageError("index pair outside the operator shape")
    keys = np.unique((pairs[:, 0] << _SHIFT) + pairs[:, 1])
    rows = keys >> _SHIFT
    offsets = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_rows), out=offsets[1:])
    return CsrMatrix(n_rows, offsets, keys & np.int64(_MAXIDX - 1), n_cols=n_cols)


def element_pairs(elements: np.ndarray) -> np.ndarray:
    """All (I, J) coefficient couplings inside each element."""
    el = np.asarray(elements, dtype=np.int64)
    k = el.shape[1]
    I = np.repeat(el, k, axis=1).reshape(-1)
    J = np.tile(el, (1, k)).reshape(-1)
    return np.stack([I, J], axis=1)


def element_positions(pattern: CsrMatrix, elements: np.ndarray) -> np.ndarray:
    """Positions ``pos[e, a, b]`` of coefficient pair (el[a], el[b]) in ``pattern``."""
    el = np.asarray(elements, dtype=np.int64)
    k = el.shape[1]
    rows = np.repeat(el[:, :, None], k, axis=2)
    cols = np.repeat(el[:, None, :], k, axis=1)
    return pattern.positions(rows, cols)


def lift_to_dof(coef: CsrMatrix) -> CsrMatrix:
    """Expand every coefficient entry (I, J) into the 3x3 DOF block."""
    n = coef.n
    lens = np.diff(coef.indptr)
    offsets = np.zeros(3 * n + 1, dtype=np.int64)
    np.cumsum(np.repeat(3 * lens, 3), out=offsets[1:])
    row_cols = (3 * coef.indices[:, None] + np.arange(3)[None, :]).reshape(-1)
    # every DOF row 3I+d repeats the column list of coefficient row I
    starts = np.repeat(3 * coef.indptr[:-1], 3)
    lens3 = np.repeat(3 * lens, 3)
    idx = np.repeat(starts - offsets[:-1], lens3) + np.arange(offsets[-1])
    return CsrMatrix(3 * n, offsets, row_cols[idx])


def spmv(A: CsrMatrix, x) -> np.ndarray:
    """``y = A x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n_cols,):
        raise UsageError(f"dimension mismatch: matrix {A.n}, vector {x.shape}")
    return A.to_scipy() @ x


def union_pattern(a: CsrMatrix, pairs) -> CsrMatrix:
    """Pattern of ``a`` plus the symmetric closure of ``pairs``."""
    rows = a.row_of_entry()
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return build_pattern(np.concatenate([np.stack([rows, a.indices], 1), pairs]), a.n)


# --------------------------------------------------------------------------
# ordering

def minimum_degree(indptr, indices, n) -> np.ndarray:
    """Minimum-degree elimination order on an explicit elimination graph.

    Ties are broken by index so the result is deterministic.
    """
    adj = []
    for i in range(n):
        s = set(indices[indptr[i]:indptr[i + 1]].tolist())
        s.discard(i)
        adj.append(s)
    heap = [(len(adj[i]), i) for i in range(n)]
    heapq.heapify(heap)
    done = np.zeros(n, dtype=bool)
    order = []
    while heap:
        d, i = heapq.heappop(heap)
        if done[i] or d != len(adj[i]):
            continue
        done[i] = True
        order.append(i)
        nb = adj[i]
        for u in nb:
            au = adj[u]
            au.discard(i)
            au |= nb
            au.discard(u)
            heapq.heappush(heap, (len(au), u))
        adj[i] = set()
    return np.asarray(order, dtype=np.int64)


def compute_ordering(A: CsrMatrix, method: str = "amd") -> np.ndarray:
    """Permutation ``p`` (new index -> old index) for the factorization.

    ``amd`` runs minimum degree on the 3x3 block graph when the size is a
    multiple of three (each block keeps its three DOFs adjacent).
    """
    n = A.n
    if method == "natural":
        return np.arange(n, dtype=np.int64)
    if method == "rcm":
        return np.asarray(reverse_cuthill_mckee(A.to_scipy(), symmetric_mode=True), dtype=np.int64)
    if method != "amd":
        raise UsageError(f"unknown ordering '{method}' (amd, rcm, natural)")
    if n % 3 == 0 and n > 0:
        nb = n // 3
        rows = A.row_of_entry() // 3
        cols = A.indices // 3
        B = build_pattern(np.stack([rows, cols], 1), nb)
        blk = minimum_degree(B.indptr, B.indices, nb)
        return (3 * blk[:, None] + np.arange(3)[None, :]).reshape(-1)
    return minimum_degree(A.indptr, A.indices, n)


# --------------------------------------------------------------------------
# direct solver

@dataclass
class SpdSolveContext:
    """Symbolic analysis and numeric factor bound to one CSR pattern."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    dense: bool
    perm: np.ndarray | None = None
    pinv: np.ndarray | None = None
    # upper triangle of P A P^T in compressed-column form + source map
    Cp: np.ndarray | None = None
    Ci: np.ndarray | None = None
    Cx: np.ndarray | None = None
    src: np.ndarray | None = None
    parent: np.ndarray | None = None
    Lp: np.ndarray | None = None
    Li: np.ndarray | None = None
    Lx: np.ndarray | None = None
    work_i: np.ndarray | None = None
    work_x: np.ndarray | None = None
    dense_buf: np.ndarray | None = None
    dense_idx: np.ndarray | None = None
    state: str = "analyzed"
    n_factorizations: int = 0
    n_refactorizations: int = 0
    _rhs: np.ndarray | None = field(default=None, repr=False)

    @property
    def factored(self) -> bool:
        return self.state == "factored"

    @property
    def nnz_factor(self) -> int:
        if self.dense:
            return self.n * (self.n + 1) // 2
        return int(self.Lp[-1])


def analyze(pattern: CsrMatrix, ordering: str = "amd", dense_threshold: int | None = None) -> SpdSolveContext:
    """Ordering plus symbolic factorization of a symmetric pattern."""
    n = pattern.n
    if np.any(pattern.diagonal_positions() < 0):
        row = int(np.argmax(pattern.diagonal_positions() < 0))
        raise StructuralError(f"pattern has no diagonal entry in row {row}")
    if dense_threshold is None:
        dense_threshold = DENSE_THRESHOLD
    if n < dense_threshold:
        rows = pattern.row_of_entry()
        ctx = SpdSolveContext(n, pattern.indptr, pattern.indices, True)
        ctx.dense_buf = np.zeros((n, n), order="F")
        ctx.dense_idx = pattern.indices * n + rows  # column-major flat index
        ctx._rhs = np.zeros(n)
        return ctx
    p = compute_ordering(pattern, ordering)
    pinv = np.empty(n, dtype=np.int64)
    pinv[p] = np.arange(n, dtype=np.int64)
    rows = pattern.row_of_entry()
    nr, nc = pinv[rows], pinv[pattern.indices]
    keep = np.flatnonzero(nr <= nc)
    order = np.lexsort((nr[keep], nc[keep]))
    src = keep[order]
    Ci = np.ascontiguousarray(nr[src])
    Cp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(nc[src], minlength=n), out=Cp[1:])
    parent, Lp = kernels.chol_symbolic(n, Cp, Ci)
    ctx = SpdSolveContext(n, pattern.indptr, pattern.indices, False, p, pinv, Cp, Ci,
                          np.zeros(len(src)), src, parent, Lp,
                          np.zeros(Lp[-1], dtype=np.int64), np.zeros(Lp[-1]),
                          np.zeros(3 * n, dtype=np.int64), np.zeros(n))
    ctx._rhs = np.zeros(n)
    log.debug("analyze: n=%d nnz(A)=%d nnz(L)=%d", n, pattern.nnz, Lp[-1])
    return ctx


def _check_structure(ctx: SpdSolveContext, A: CsrMatrix) -> None:
    if A.indptr is ctx.indptr and A.indices is ctx.indices:
        return
    if A.n != ctx.n or not (np.array_equal(A.indptr, ctx.indptr) and np.array_equal(A.indices, ctx.indices)):
        raise StructuralError("matrix structure differs from the analyzed pattern")


def _numeric(ctx: SpdSolveContext, A: CsrMatrix) -> None:
    if ctx.dense:
        buf = ctx.dense_buf
        buf.reshape(-1, order="F")[:] = 0.0
        flat = buf.reshape(-1, order="F")
        flat[ctx.dense_idx] = A.values
        c, info = lapack.dpotrf(buf, lower=1, overwrite_a=1, clean=0)
        if info > 0:
            ctx.state = "analyzed"
            raise NotPositiveDefiniteError(
                f"non-positive pivot at row {info - 1}; reduce the time step", row=info - 1)
        if c is not buf:  # pragma: no cover - LAPACK wrapper copied
            buf[...] = c
        return
    np.take(A.values, ctx.src, out=ctx.Cx)
    bad = kernels.chol_numeric(ctx.n, ctx.Cp, ctx.Ci, ctx.Cx, ctx.parent, ctx.Lp,
                               ctx.Li, ctx.Lx, ctx.work_i, ctx.work_x)
    if bad >= 0:
        ctx.state = "analyzed"
        row = int(ctx.perm[bad])
        raise NotPositiveDefiniteError(f"non-positive pivot at row {row}; reduce the time step", row=row)


def factorize(ctx: SpdSolveContext, A: CsrMatrix) -> SpdSolveContext:
    """Full numeric factorization."""
    _check_structure(ctx, A)
    _numeric(ctx, A)
    ctx.state = "factored"
    ctx.n_factorizations += 1
    return ctx


def refactorize(ctx: SpdSolveContext, A: CsrMatrix) -> SpdSolveContext:
    """Numeric factorization reusing the symbolic analysis and buffers."""
    if ctx.n_factorizations == 0:
        raise SolverStateError("refactorize called before the first factorize")
    _check_structure(ctx, A)
    _numeric(ctx, A)
    ctx.state = "factored"
    ctx.n_refactorizations += 1
    return ctx


def solve(ctx: SpdSolveContext, rhs) -> np.ndarray:
    """Forward and backward substitution with the current factor."""
    if not ctx.factored:
        raise SolverStateError("solve called on an unfactored context")
    b = np.asarray(rhs, dtype=np.float64)
    if b.shape != (ctx.n,):
        raise UsageError("right-hand side has the wrong length")
    if ctx.dense:
        x, info = lapack.dpotrs(ctx.dense_buf, b, lower=1)
        return x
    y = ctx._rhs
    np.take(b, ctx.perm, out=y)
    kernels.chol_solve(ctx.n, ctx.Lp, ctx.Li, ctx.Lx, y)
    x = np.empty(ctx.n)
    x[ctx.perm] = y
    return x


def factor_dense(ctx: SpdSolveContext) -> np.ndarray:
    """The lower factor of the permuted matrix as a dense array (for tests)."""
    if ctx.dense:
        return np.tril(ctx.dense_buf)
    L = np.zeros((ctx.n, ctx.n))
    for j in range(ctx.n):
        s, e = ctx.Lp[j], ctx.Lp[j + 1]
        L[ctx.Li[s:e], j] = ctx.Lx[s:e]
    return L


def residual_ok(A: CsrMatrix, x, b, tol: float = 1e-10) -> bool:
    """Backward-error contract ``|Ax-b| <= tol (|A|_F |x| + |b|)``."""
    r = spmv(A, x) - b
    return bool(np.linalg.norm(r) <= tol * (A.frobenius() * np.linalg.norm(x) + np.linalg.norm(b)))
