"""Triangle-soup contact detection without a BVH.

The broad phase inflates every surface triangle by a velocity-dependent
margin, bins the inflated bounding boxes into a uniform grid, tests all
triangle pairs sharing a bin with an exact triangle distance, and removes
duplicates.  Active triangles are grouped into patches by min-label
propagation over shared edges.  The narrow phase projects each candidate
triangle onto the other's plane, clips, and reduces primitive contacts to
one contact per patch pair.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import Mesh
from .errors import DegeneratePatchError, DomainError, UsageError

log = logging.getLogger(__name__)

MARGIN_A = 1.0
MARGIN_B = 0.5


# ------------------------------------------------------------------ soup

@dataclass
class TriangleSoup:
    """Surface triangles of all bodies, decoupled from the volume meshes.

    ``vertices`` holds current positions; the first ``n_mesh_vertices``
    follow the FE nodes, the rest belong to static environment surfaces.
    ``nbr_ptr``/``nbr_idx`` store shared-edge neighbours in CSR form.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    owner: np.ndarray
    static: np.ndarray
    n_mesh_vertices: int = 0
    velocities: np.ndarray | None = None
    nbr_ptr: np.ndarray = field(default=None, repr=False)
    nbr_idx: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.owner = np.asarray(self.owner, dtype=np.int64).reshape(-1)
        self.static = np.asarray(self.static, dtype=bool).reshape(-1)
        if self.velocities is None:
            self.velocities = np.zeros_like(self.vertices)
        if self.nbr_ptr is None:
            self.nbr_ptr, self.nbr_idx = shared_edge_neighbors(self.triangles, self.owner)

    @classmethod
    def from_mesh(cls, mesh: Mesh, environment=()) -> "TriangleSoup":
        """Soup of the mesh surface plus static ``(vertices, triangles, body)`` surfaces."""
        verts = [mesh.nodes]
        tris = [mesh.triangles]
        owner = [mesh.triangle_body]
        static = [np.zeros(len(mesh.triangles), bool)]
        off = mesh.n_nodes
        for P, T, body in environment:
            P = np.asarray(P, dtype=float).reshape(-1, 3)
            T = np.asarray(T, dtype=np.int64).reshape(-1, 3)
            verts.append(P)
            tris.append(T + off)
            owner.append(np.full(len(T), int(body)))
            static.append(np.ones(len(T), bool))
            off += len(P)
        return cls(np.concatenate(verts), np.concatenate(tris), np.concatenate(owner),
                   np.concatenate(static), n_mesh_vertices=mesh.n_nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def update(self, positions, velocities=None) -> None:
        """Refresh the mesh-owned vertices from nodal positions (and velocities)."""
        n = self.n_mesh_vertices
        self.vertices[:n] = np.asarray(positions, dtype=float).reshape(-1, 3)
        if velocities is not None:
            self.velocities[:n] = np.asarray(velocities, dtype=float).reshape(-1, 3)

    def corners(self, ids=None) -> np.ndarray:
        t = self.triangles if ids is None else self.triangles[ids]
        return self.vertices[t]

    def neighbors(self, t: int) -> np.ndarray:
        return self.nbr_idx[self.nbr_ptr[t]:self.nbr_ptr[t + 1]]

    def body_speeds(self) -> np.ndarray:
        """Per-triangle speed estimate: max nodal speed of the owning body."""
        speed = np.linalg.norm(self.velocities, axis=1)
        tri_speed = speed[self.triangles].max(axis=1)
        bodies, inv = np.unique(self.owner, return_inverse=True)
        body_max = np.zeros(len(bodies))
        np.maximum.at(body_max, inv, tri_speed)
        return body_max[inv]


def shared_edge_neighbors(triangles: np.ndarray, owner: np.ndarray):
    """Symmetric shared-edge adjacency (same owner only) in CSR form."""
    T = len(triangles)
    if T == 0:
        return np.zeros(1, np.int64), np.zeros(0, np.int64)
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    tid = np.tile(np.arange(T), 3)
    lo, hi = e.min(axis=1), e.max(axis=1)
    nv = int(triangles.max()) + 1
    key = (owner[tid] * nv + lo) * nv + hi
    order = np.argsort(key, kind="stable")
    key, tid = key[order], tid[order]
    src, dst = [], []
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    ends = np.r_[starts[1:], len(key)]
    for s, t in zip(starts, ends):
        if t - s > 1:
            ids = tid[s:t]
            a, b = np.meshgrid(ids, ids, indexing="ij")
            m = a != b
            src.append(a[m])
            dst.append(b[m])
    if src:
        src, dst = np.concatenate(src), np.concatenate(dst)
        pair = np.unique(src * T + dst)
        src, dst = pair // T, pair % T
    else:
        src = dst = np.zeros(0, np.int64)
    ptr = np.zeros(T + 1, np.int64)
    np.add.at(ptr, src + 1, 1)
    return np.cumsum(ptr), dst.astype(np.int64)


# ------------------------------------------------------------------ broad phase

def compute_margin(v, h: float, n_max: int, a: float = MARGIN_A, b: float = MARGIN_B):
    """Detection margin ``(a*v + b)*h*n_max`` (elementwise in ``v``)."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or h < 0 or n_max < 0 or a < 0 or b < 0:
        raise UsageError("margin inputs must be non-negative")
    d = (a * v + b) * h * n_max
    return float(d) if d.ndim == 0 else d


@dataclass(frozen=True)
class BinGrid:
    """Uniform grid over ``[lo, lo + size*dims)``; bin id is ``(ix*ny + iy)*nz + iz``."""

    lo: tuple
    size: float
    dims: tuple

    def __post_init__(self):
        if not self.size > 0:
            raise UsageError("bin size must be positive")

    @classmethod
    def covering(cls, lo, hi, size: float, max_bins: int = 2_000_000) -> "BinGrid":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        ext = np.maximum(hi - lo, 0.0)
        size = float(size)
        while True:
            dims = np.maximum(np.ceil(ext / size).astype(np.int64), 1)
            dims = np.where(lo + dims * size <= hi, dims + 1, dims)
            if int(np.prod(dims)) <= max_bins:
                break
            size *= 1.5
        return cls(tuple(lo.tolist()), size, tuple(int(d) for d in dims))

    @property
    def n_bins(self) -> int:
        return int(np.prod(self.dims))

    def cell_range(self, lo, hi):
        """Inclusive integer cell ranges of boxes (unclipped)."""
        o = np.asarray(self.lo)
        return (np.floor((lo - o) / self.size).astype(np.int64),
                np.floor((hi - o) / self.size).astype(np.int64))

    def bin_id(self, ix, iy, iz):
        return (ix * self.dims[1] + iy) * self.dims[2] + iz


def margined_boxes(corners: np.ndarray, margins) -> tuple[np.ndarray, np.ndarray]:
    m = np.asarray(margins, dtype=float).reshape(-1, 1)
    return corners.min(axis=1) - m, corners.max(axis=1) + m


def bin_triangles(lo: np.ndarray, hi: np.ndarray, grid: BinGrid, clip=None):
    """Sorted ``(bin_ids, triangle_ids)`` of every box/bin overlap.

    Count pass then fill pass, mirroring a two-launch GPU scheme.  Boxes
    flagged in ``clip`` are clipped to the domain (static surfaces);
    any other box leaving the domain raises :class:`DomainError`.
    """
    n = len(lo)
    r0, r1 = grid.cell_range(lo, hi)
    dims = np.asarray(grid.dims)
    clip = np.zeros(n, bool) if clip is None else np.asarray(clip, bool)
    outside = np.any(r0 < 0, axis=1) | np.any(r1 >= dims, axis=1)
    bad = np.flatnonzero(outside & ~clip)
    if bad.size:
        t = int(bad[0])
        raise DomainError(f"triangle {t} lies outside the binning domain; grow the domain", triangle=t)
    c0 = np.clip(r0, 0, dims - 1)
    c1 = np.clip(r1, 0, dims - 1)
    span = c1 - c0 + 1
    miss = np.any(r1 < 0, axis=1) | np.any(r0 >= dims, axis=1)
    span[miss] = 0
    # pass 1: counts and offsets
    counts = span.prod(axis=1)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    total = int(offsets[-1])
    # pass 2: fill
    tri = np.repeat(np.arange(n, dtype=np.int64), counts)
    local = np.arange(total, dtype=np.int64) - np.repeat(offsets[:-1], counts)
    sy, sz = span[tri, 1], span[tri, 2]
    ix = c0[tri, 0] + local // (sy * sz)
    rem = local % (sy * sz)
    iy = c0[tri, 1] + rem // sz
    iz = c0[tri, 2] + rem % sz
    bins = grid.bin_id(ix, iy, iz)
    order = np.lexsort((tri, bins))
    return bins[order], tri[order]


@dataclass
class AcsPair:
    """One active-contact-set entry; ``i < j``."""

    i: int
    j: int
    body_i: int
    body_j: int
    patch_i: int
    patch_j: int
    timestamp: int


@dataclass
class Acs:
    """Active contact set in struct-of-arrays form."""

    i: np.ndarray
    j: np.ndarray
    body_i: np.ndarray
    body_j: np.ndarray
    patch_i: np.ndarray
    patch_j: np.ndarray
    label_i: np.ndarray
    label_j: np.ndarray
    timestamp: int = 0
    max_bin_population: int = 0
    advisory: bool = False

    @classmethod
    def empty(cls, timestamp: int = 0) -> "Acs":
        z = np.zeros(0, np.int64)
        return cls(z, z, z, z, z, z, z, z, timestamp)

    def __len__(self) -> int:
        return len(self.i)

    def pairs(self):
        for k in range(len(self)):
            yield AcsPair(int(self.i[k]), int(self.j[k]), int(self.body_i[k]), int(self.body_j[k]),
                          int(self.patch_i[k]), int(self.patch_j[k]), self.timestamp)

    def copy(self) -> "Acs":
        return Acs(self.i.copy(), self.j.copy(), self.body_i.copy(), self.body_j.copy(),
                   self.patch_i.copy(), self.patch_j.copy(), self.label_i.copy(), self.label_j.copy(),
                   self.timestamp, self.max_bin_population, self.advisory)


def _bin_pairs(bins: np.ndarray, tris: np.ndarray):
    """All within-bin triangle pairs, ``(n_g-1) n_g / 2`` per bin."""
    if len(bins) == 0:
        z = np.zeros(0, np.int64)
        return z, z, 0
    starts = np.flatnonzero(np.r_[True, bins[1:] != bins[:-1]])
    sizes = np.diff(np.r_[starts, len(bins)])
    out_a, out_b = [], []
    for s in np.unique(sizes):
        if s < 2:
            continue
        st = starts[sizes == s]
        ia, ib = np.triu_indices(s, 1)
        out_a.append(tris[(st[:, None] + ia[None, :]).ravel()])
        out_b.append(tris[(st[:, None] + ib[None, :]).ravel()])
    if not out_a:
        z = np.zeros(0, np.int64)
        return z, z, int(sizes.max())
    return np.concatenate(out_a), np.concatenate(out_b), int(sizes.max())


def find_candidates(bins, tris, soup: TriangleSoup, margins, self_collision: bool = False,
                    bin_cap: int = 256, timestamp: int = 0) -> Acs:
    """Exact-distance candidate test of all within-bin pairs, deduplicated.

    A pair is a candidate when the distance between the base triangles
    is at most ``d_i + d_j``.  Same-body pairs are skipped unless
    ``self_collision`` is set, in which case pairs sharing a vertex are
    skipped instead.  Static/static pairs are never candidates.
    """
    a, b, pop = _bin_pairs(np.asarray(bins), np.asarray(tris))
    advisory = pop > bin_cap
    if advisory:
        log.info("bin population %d exceeds cap %d; shrink the bin size", pop, bin_cap)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    T = max(soup.n_triangles, 1)
    key = np.unique(lo * T + hi)
    lo, hi = key // T, key % T
    keep = ~(soup.static[lo] & soup.static[hi])
    same = soup.owner[lo] == soup.owner[hi]
    if self_collision:
        tl, th = soup.triangles[lo], soup.triangles[hi]
        share = np.any(tl[:, :, None] == th[:, None, :], axis=(1, 2))
        keep &= ~(same & share)
    else:
        keep &= ~same
    lo, hi = lo[keep], hi[keep]
    margins = np.asarray(margins, dtype=float)
    C = soup.corners()
    blo, bhi = margined_boxes(C, margins)
    ov = np.all((blo[lo] <= bhi[hi]) & (blo[hi] <= bhi[lo]), axis=1)
    lo, hi = lo[ov], hi[ov]
    if len(lo):
        dist = kernels.tri_tri_distance(np.ascontiguousarray(C[lo]), np.ascontiguousarray(C[hi]))
        hit = dist <= margins[lo] + margins[hi]
        lo, hi = lo[hit], hi[hit]
    z = np.zeros(len(lo), np.int64)
    acs = Acs(lo, hi, soup.owner[lo], soup.owner[hi], z, z.copy(), z.copy(), z.copy(),
              timestamp, pop, advisory)
    return acs


# ------------------------------------------------------------------ patches

def propagate_labels(nbr_ptr, nbr_idx, active) -> np.ndarray:
    """Min-label flooding over shared edges restricted to ``active``.

    Returns the converged raw label (smallest triangle id of the
    component) for active triangles and -1 elsewhere.
    """
    active = np.asarray(active, bool)
    T = len(active)
    label = np.where(active, np.arange(T), -1)
    src = np.repeat(np.arange(T), np.diff(nbr_ptr))
    dst = np.asarray(nbr_idx)
    m = active[src] & active[dst]
    src, dst = src[m], dst[m]
    while True:
        new = label.copy()
        np.minimum.at(new, src, label[dst])
        if np.array_equal(new, label):
            return label
        label = new


def compact_labels(raw: np.ndarray) -> np.ndarray:
    """Contiguous patch ids from raw labels by a prefix scan over root flags."""
    raw = np.asarray(raw)
    T = len(raw)
    root = (raw == np.arange(T)).astype(np.int64)
    scan = np.cumsum(root) - 1
    out = np.full(T, -1, np.int64)
    act = raw >= 0
    out[act] = scan[raw[act]]
    return out


def patch_labels(soup: TriangleSoup, active) -> np.ndarray:
    """Patch id per triangle (-1 for inactive triangles)."""
    return compact_labels(propagate_labels(soup.nbr_ptr, soup.nbr_idx, active))


@dataclass
class BroadPhase:
    """Margins, binning and candidate search with a self-tuning bin size."""

    h: float
    n_max: int = 1
    a: float = MARGIN_A
    b: float = MARGIN_B
    self_collision: bool = False
    bin_cap: int = 256
    bin_size: float | None = None

    def margins(self, soup: TriangleSoup) -> np.ndarray:
        return compute_margin(soup.body_speeds(), self.h, self.n_max, self.a, self.b)

    def grid_for(self, soup: TriangleSoup, lo, hi) -> BinGrid | None:
        dyn = ~soup.static
        if not dyn.any():
            return None
        if self.bin_size is None:
            diag = np.linalg.norm(hi[dyn] - lo[dyn], axis=1)
            self.bin_size = 3.0 * float(np.median(diag))
        return BinGrid.covering(lo[dyn].min(axis=0), hi[dyn].max(axis=0), self.bin_size)

    def detect(self, soup: TriangleSoup, timestamp: int = 0) -> Acs:
        """One detection pass: snapshot of the soup to a labelled ACS."""
        if soup.n_triangles == 0:
            return Acs.empty(timestamp)
        margins = self.margins(soup)
        lo, hi = margined_boxes(soup.corners(), margins)
        grid = self.grid_for(soup, lo, hi)
        if grid is None:
            return Acs.empty(timestamp)
        bins, tris = bin_triangles(lo, hi, grid, clip=soup.static)
        acs = find_candidates(bins, tris, soup, margins, self.self_collision, self.bin_cap, timestamp)
        if acs.advisory:
            self.bin_size *= 0.7
        active = np.zeros(soup.n_triangles, bool)
        active[acs.i] = True
        active[acs.j] = True
        raw = propagate_labels(soup.nbr_ptr, soup.nbr_idx, active)
        pid = compact_labels(raw)
        acs.patch_i, acs.patch_j = pid[acs.i], pid[acs.j]
        acs.label_i, acs.label_j = raw[acs.i], raw[acs.j]
        return acs


# ------------------------------------------------------------------ narrow phase

@dataclass
class PrimitiveContact:
    """Contact of one triangle pair; ``normal`` is the force direction on the first triangle's body."""

    depth: float
    point: np.ndarray
    area: float
    normal: np.ndarray


@dataclass
class PatchContact:
    """Contact between two patches; ``normal`` points along the force on ``body_a``."""

    body_a: int
    body_b: int
    key: tuple
    normal: np.ndarray
    area: float
    depth: float
    point: np.ndarray
    triangles: frozenset = frozenset()
    d_t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    n_primitives: int = 1


def _unit_normals(C):
    n = np.cross(C[:, 1] - C[:, 0], C[:, 2] - C[:, 0])
    area2 = np.linalg.norm(n, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = n / area2[:, None]
    return u, 0.5 * area2


def _clip(poly, count, dist):
    """Batched Sutherland-Hodgman step keeping ``dist <= 0``.

    ``poly`` is ``(k, M, D)`` with ``count`` valid rows per polygon.
    """
    k, M, D = poly.shape
    idx = np.arange(M)
    valid = idx[None, :] < count[:, None]
    nxt = np.where(idx[None, :] + 1 < count[:, None], idx[None, :] + 1, 0)
    dn = np.take_along_axis(dist, nxt, axis=1)
    pn = np.take_along_axis(poly, nxt[:, :, None], axis=1)
    inside = dist <= 0.0
    inside_n = dn <= 0.0
    cross = valid & (inside != inside_n)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(cross, dist / (dist - dn), 0.0)
    inter = poly + t[:, :, None] * (pn - poly)
    keep0 = valid & inside
    # each source vertex emits up to two outputs: itself, then the crossing
    cand = np.stack([poly, inter], axis=2).reshape(k, 2 * M, D)
    flag = np.stack([keep0, cross], axis=2).reshape(k, 2 * M)
    order = np.argsort(~flag, axis=1, kind="stable")
    out = np.take_along_axis(cand, order[:, :, None], axis=1)[:, :M + 1]
    new_count = flag.sum(axis=1)
    return out, new_count


def _project_and_clip(P, Q):
    """Project triangles ``P`` onto the planes of ``Q`` and clip.

    Returns ``(ok, depth, point, area, nQ)``; signed distances are taken
    along the outward normal of ``Q`` so negative means penetration.
    """
    k = len(P)
    nQ, areaQ = _unit_normals(Q)
    e1 = Q[:, 1] - Q[:, 0]
    u = e1 / np.linalg.norm(e1, axis=1)[:, None]
    w = np.cross(nQ, u)
    rel = P - Q[:, None, 0]
    s = np.einsum("kid,kd->ki", rel, nQ)
    pu = np.einsum("kid,kd->ki", rel, u)
    pw = np.einsum("kid,kd->ki", rel, w)
    M = 8
    poly = np.zeros((k, M, 3))
    poly[:, :3, 0], poly[:, :3, 1], poly[:, :3, 2] = pu, pw, s
    # orient the projected polygon counter-clockwise
    cr = (pu[:, 1] - pu[:, 0]) * (pw[:, 2] - pw[:, 0]) - (pw[:, 1] - pw[:, 0]) * (pu[:, 2] - pu[:, 0])
    flip = cr < 0
    poly[flip, :3] = poly[flip, 2::-1][:, :3]
    count = np.full(k, 3)
    q2 = np.stack([np.einsum("kid,kd->ki", Q - Q[:, None, 0], u),
                   np.einsum("kid,kd->ki", Q - Q[:, None, 0], w)], axis=2)
    for a in range(3):
        qa, qb = q2[:, a], q2[:, (a + 1) % 3]
        ex, ey = (qb - qa)[:, 0], (qb - qa)[:, 1]
        dist = -(ex[:, None] * (poly[:, :, 1] - qa[:, None, 1]) - ey[:, None] * (poly[:, :, 0] - qa[:, None, 0]))
        poly, count = _clip(poly, count, dist)
        poly = poly[:, :M]
    poly, count = _clip(poly, count, poly[:, :, 2].copy())
    poly = poly[:, :M]
    idx = np.arange(M)
    valid = idx[None, :] < count[:, None]
    # fan triangulation for area, centroid and the mean signed distance
    p0 = poly[:, :1]
    pi, pj = poly[:, 1:-1], poly[:, 2:]
    fan_ok = (idx[None, 2:] < count[:, None])
    cr = (pi[..., 0] - p0[..., 0]) * (pj[..., 1] - p0[..., 1]) - (pi[..., 1] - p0[..., 1]) * (pj[..., 0] - p0[..., 0])
    a_f = np.where(fan_ok, 0.5 * cr, 0.0)
    area = a_f.sum(axis=1)
    cen = (p0 + pi + pj) / 3.0
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.einsum("kf,kfd->kd", a_f, cen) / area[:, None]
    depth = np.where(valid, -poly[:, :, 2], -np.inf).max(axis=1)
    depth = np.maximum(depth, 0.0)
    tol = 1e-12 * np.maximum(areaQ, 1e-300)
    ok = (count >= 3) & (area > tol) & np.isfinite(area) & (areaQ > 0)
    point = Q[:, 0] + c[:, 0:1] * u + c[:, 1:2] * w + 0.5 * c[:, 2:3] * nQ
    return ok, depth, point, area, nQ


def primitive_contacts(TA: np.ndarray, TB: np.ndarray):
    """Batched projection contact of triangle pairs ``(k,3,3)``.

    Both projection roles are evaluated and the one with the smaller
    depth is kept; a pair counts only when both clipped polygons are
    non-empty.  Returns ``(ok, depth, point, area, normal)`` with
    ``normal`` the force direction on the body of ``TA``.
    """
    TA = np.asarray(TA, dtype=float).reshape(-1, 3, 3)
    TB = np.asarray(TB, dtype=float).reshape(-1, 3, 3)
    _, aA = _unit_normals(TA)
    _, aB = _unit_normals(TB)
    degenerate = (aA <= 0) | (aB <= 0) | ~np.isfinite(aA) | ~np.isfinite(aB)
    if degenerate.any():
        log.debug("skipping %d degenerate triangle pairs", int(degenerate.sum()))
    ok1, d1, p1, A1, n1 = _project_and_clip(TA, TB)   # A onto B: force on A along +nB
    ok2, d2, p2, A2, n2 = _project_and_clip(TB, TA)   # B onto A: force on A along -nA
    # an edge-on pair penetrates in one projection only; it is not a contact
    use2 = d2 < d1
    ok = ok1 & ok2 & ~degenerate
    depth = np.where(use2, d2, d1)
    point = np.where(use2[:, None], p2, p1)
    area = np.where(use2, A2, A1)
    normal = np.where(use2[:, None], -n2, n1)
    depth[~ok], area[~ok] = 0.0, 0.0
    return ok, depth, point, area, normal


def primitive_contact(triA, triB) -> PrimitiveContact | None:
    """Projection contact of one triangle pair, or ``None`` when separated."""
    ok, d, p, A, n = primitive_contacts(np.asarray(triA)[None], np.asarray(triB)[None])
    if not ok[0]:
        return None
    return PrimitiveContact(float(d[0]), p[0].copy(), float(A[0]), n[0].copy())


def patch_reduce(depth, point, area, normal, rel_tol: float = 1e-12):
    """Area-voted patch normal and projected patch quantities.

    Returns ``(normal, area, depth, point)``.
    """
    depth = np.asarray(depth, dtype=float).reshape(-1)
    area = np.asarray(area, dtype=float).reshape(-1)
    point = np.asarray(point, dtype=float).reshape(-1, 3)
    normal = np.asarray(normal, dtype=float).reshape(-1, 3)
    if len(area) == 0:
        raise UsageError("patch_reduce needs at least one primitive contact")
    vote = (area[:, None] * normal).sum(axis=0)
    nv = np.linalg.norm(vote)
    if not nv > rel_tol * max(area.sum(), 1e-300):
        raise DegeneratePatchError("primitive normals cancel; patch contact dropped")
    n = vote / nv
    cos = np.clip(normal @ n, 0.0, 1.0)
    a_p = area * cos
    d_p = depth * cos
    w = a_p * d_p
    if w.sum() <= 0.0:
        w = np.ones_like(a_p)
    pt = (w[:, None] * point).sum(axis=0) / w.sum()
    return n, float(a_p.sum()), float(d_p.max()), pt


def narrow_phase(soup: TriangleSoup, acs: Acs) -> list[PatchContact]:
    """Primitive contacts for every ACS pair, reduced per patch pair.

    Each pair is oriented so that triangle ``a`` comes from the side
    with the smaller ``(body, raw label)``; history keys are the raw
    labels, which are stable while the patch keeps its lowest triangle.
    """
    if len(acs) == 0:
        return []
    swap = (acs.body_j < acs.body_i) | ((acs.body_j == acs.body_i) & (acs.label_j < acs.label_i))
    ta = np.where(swap, acs.j, acs.i)
    tb = np.where(swap, acs.i, acs.j)
    ba = np.where(swap, acs.body_j, acs.body_i)
    bb = np.where(swap, acs.body_i, acs.body_j)
    la = np.where(swap, acs.label_j, acs.label_i)
    lb = np.where(swap, acs.label_i, acs.label_j)
    ok, d, p, A, n = primitive_contacts(soup.corners(ta), soup.corners(tb))
    if not ok.any():
        return []
    ta, tb, ba, bb, la, lb = ta[ok], tb[ok], ba[ok], bb[ok], la[ok], lb[ok]
    d, p, A, n = d[ok], p[ok], A[ok], n[ok]
    keys = np.stack([ba, la, bb, lb], axis=1)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    out = []
    for g in range(len(uniq)):
        m = inv == g
        try:
            nn, area, depth, pt = patch_reduce(d[m], p[m], A[m], n[m])
        except DegeneratePatchError as err:
            log.info("%s (bodies %d/%d)", err, uniq[g, 0], uniq[g, 2])
            continue
        tri = frozenset(np.concatenate([ta[m], tb[m]]).tolist())
        out.append(PatchContact(int(uniq[g, 0]), int(uniq[g, 2]), tuple(int(x) for x in uniq[g]),
                                nn, area, depth, pt, tri, n_primitives=int(m.sum())))
    return out


def all_pairs_within(soup: TriangleSoup, margins, self_collision: bool = False):
    """Brute-force reference: every eligible pair within ``d_i + d_j``."""
    T = soup.n_triangles
    ii, jj = np.triu_indices(T, 1)
    keep = ~(soup.static[ii] & soup.static[jj])
    if self_collision:
        tl, th = soup.triangles[ii], soup.triangles[jj]
        share = np.any(tl[:, :, None] == th[:, None, :], axis=(1, 2))
        keep &= ~((soup.owner[ii] == soup.owner[jj]) & share)
    else:
        keep &= soup.owner[ii] != soup.owner[jj]
    ii, jj = ii[keep], jj[keep]
    C = soup.corners()
    margins = np.asarray(margins, dtype=float)
    dist = kernels.tri_tri_distance(np.ascontiguousarray(C[ii]), np.ascontiguousarray(C[jj]))
    hit = dist <= margins[ii] + margins[jj]
    return set(zip(ii[hit].tolist(), jj[hit].tolist()))
