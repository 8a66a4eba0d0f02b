"""Patch contact forces, rigid-body reference dynamics and load distribution.

Normal and tangential forces follow a Hertz-Mindlin-type spring-dashpot
law scaled by ``sqrt(A/pi)``, with a Coulomb cap on the tangential part
and a rolling-resistance torque.  For deformable bodies the patch force
is spread over nearby surface nodes and enters the implicit step as a
fixed external load.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError

log = logging.getLogger(__name__)

STICK_SPEED = 1e-4
_TINY_RESTITUTION = 1e-10


@dataclass
class ContactParams:
    """Contact law constants.

    ``gamma_n``/``gamma_t`` left as ``None`` are derived from the
    restitution coefficient ``e`` for every evaluation (see
    :func:`restitution_damping`).
    """

    k_n: float = 1e8
    k_t: float | None = None
    gamma_n: float | None = None
    gamma_t: float | None = None
    mu_s: float = 0.5
    mu_k: float = 0.5
    mu_r: float = 0.0
    e: float = 0.5
    stick_speed: float = STICK_SPEED

    def __post_init__(self):
        if self.k_t is None:
            self.k_t = 2.0 / 7.0 * self.k_n
        if self.k_n < 0 or self.k_t < 0:
            raise UsageError("contact stiffnesses must be non-negative")
        if not (0 <= self.mu_k <= self.mu_s):
            raise UsageError("friction coefficients need 0 <= mu_k <= mu_s")
        if self.mu_r < 0:
            raise UsageError("rolling friction must be non-negative")
        if not (0 <= self.e <= 1):
            raise UsageError("restitution must lie in [0, 1]")
        for name in ("gamma_n", "gamma_t"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise UsageError(f"{name} must be non-negative")

    @classmethod
    def hertz(cls, E: float, nu: float, e: float, mu_s: float, mu_k: float | None = None,
              E2: float | None = None, nu2: float | None = None, mu_r: float = 0.0) -> "ContactParams":
        """Stiffness from elastic constants: ``k_n = 4/3 E*``, ``k_t = 8 G*``.

        The second surface defaults to rigid.
        """
        inv_e = (1 - nu ** 2) / E + (0.0 if E2 is None else (1 - nu2 ** 2) / E2)
        G = E / (2 * (1 + nu))
        inv_g = (2 - nu) / G
        if E2 is not None:
            inv_g += (2 - nu2) / (E2 / (2 * (1 + nu2)))
        return cls(k_n=4.0 / 3.0 / inv_e, k_t=8.0 / inv_g, mu_s=mu_s,
                   mu_k=mu_s if mu_k is None else mu_k, mu_r=mu_r, e=e)


def restitution_damping(k: float, e: float, a: float, m_bar: float, normal: bool = True) -> float:
    """Damping factor ``gamma`` reproducing restitution ``e`` for a Hertzian spring.

    Uses ``gamma*m*a = 2 sqrt(5/6) |beta| sqrt(S m)`` with
    ``beta = ln e / sqrt(ln^2 e + pi^2)`` and contact stiffness
    ``S = 1.5 k a`` (normal) or ``S = k a`` (tangential).
    """
    if a <= 0 or m_bar <= 0 or k <= 0:
        return 0.0
    loge = math.log(max(e, _TINY_RESTITUTION))
    beta = loge / math.sqrt(loge * loge + math.pi ** 2)
    S = (1.5 if normal else 1.0) * k * a
    return 2.0 * math.sqrt(5.0 / 6.0) * abs(beta) * math.sqrt(S * m_bar) / (a * m_bar)


def contact_forces(normal, area: float, depth: float, v_rel, params: ContactParams, m_bar: float,
                   d_t, dt: float, omega_rel=None, m_eff=None):
    """Forces on body ``a`` of one patch contact.

    ``normal`` points along the force on body ``a``; ``v_rel`` and
    ``omega_rel`` are the velocities of ``a`` relative to ``b``.
    ``m_eff`` optionally gives the effective masses ``(normal, tangential)``
    at the contact point; each dashpot coefficient is then limited to
    ``m_eff / dt`` so that the explicitly applied damping removes at most
    the current relative velocity within one step.
    Returns ``(F_n, F_t, tau_r, d_t_new)``.
    """
    n = np.asarray(normal, dtype=float)
    zero = np.zeros(3)
    d_t = np.asarray(d_t, dtype=float)
    if area <= 0.0:
        log.debug("contact with non-positive area skipped")
        return zero, zero.copy(), zero.copy(), zero.copy()
    a = math.sqrt(area / math.pi)
    v_rel = np.asarray(v_rel, dtype=float)
    vn_s = float(v_rel @ n)
    v_n = vn_s * n
    v_t = v_rel - v_n
    g_n = params.gamma_n if params.gamma_n is not None else restitution_damping(params.k_n, params.e, a, m_bar)
    g_t = params.gamma_t if params.gamma_t is not None else restitution_damping(params.k_t, params.e, a, m_bar, False)
    c_n, c_t = a * g_n * m_bar, a * g_t * m_bar
    if m_eff is not None and dt > 0:
        c_n = min(c_n, m_eff[0] / dt)
        c_t = min(c_t, m_eff[1] / dt)
    fn_s = a * params.k_n * depth - c_n * vn_s
    fn_s = max(fn_s, 0.0)
    F_n = fn_s * n
    # history: rotate into the current tangent plane, then advance
    d_t = d_t - (d_t @ n) * n + v_t * dt
    d_t = d_t - (d_t @ n) * n
    F_t = -a * params.k_t * d_t - c_t * v_t
    F_t = F_t - (F_t @ n) * n
    mu = params.mu_s if math.hypot(*v_t) < params.stick_speed else params.mu_k
    cap = mu * fn_s
    # hypot rescales, so the cone stays exact when squared components underflow
    ft = math.hypot(*F_t)
    if ft > cap:
        if ft > 0.0:
            that = F_t / ft
            F_t = cap * that
            if params.k_t > 0:
                d_t = -(cap / (a * params.k_t)) * that
        else:
            F_t = zero.copy()
    tau = zero.copy()
    if omega_rel is not None and params.mu_r > 0.0:
        w = np.asarray(omega_rel, dtype=float)
        wn = np.linalg.norm(w)
        if wn > 0.0:
            tau = -params.mu_r * fn_s * a * w / wn
    return F_n, F_t, tau, d_t


# ------------------------------------------------------------------ history

@dataclass
class HistoryEntry:
    d_t: np.ndarray
    last_seen: int
    triangles: frozenset


class ContactHistory:
    """Tangential displacement per patch pair.

    Keys are ``(body_a, label_a, body_b, label_b)``.  A new key inherits
    the history of the previous-step entry with the largest triangle
    overlap, so a patch that loses its lowest triangle keeps its spring.
    Entries not seen in a step expire.
    """

    def __init__(self):
        self.entries: dict[tuple, HistoryEntry] = {}

    def lookup(self, key, triangles=frozenset()) -> np.ndarray:
        if key in self.entries:
            return self.entries[key].d_t.copy()
        best, best_overlap = None, 0
        for k, ent in self.entries.items():
            if k[0] != key[0] or k[2] != key[2]:
                continue
            ov = len(ent.triangles & triangles)
            if ov > best_overlap:
                best, best_overlap = ent, ov
        return best.d_t.copy() if best is not None else np.zeros(3)

    def commit(self, updates: dict, step: int) -> None:
        """Replace the table by this step's entries (older ones expire)."""
        self.entries = {k: HistoryEntry(np.asarray(d, float).copy(), step, tris)
                        for k, (d, tris) in updates.items()}

    def __len__(self) -> int:
        return len(self.entries)


# ------------------------------------------------------------------ rigid bodies

def _skew(w):
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def rotation_exp(phi) -> np.ndarray:
    """Rotation matrix of the rotation vector ``phi`` (Rodrigues)."""
    phi = np.asarray(phi, dtype=float)
    th = np.linalg.norm(phi)
    K = _skew(phi)
    if th < 1e-12:
        return np.eye(3) + K
    return np.eye(3) + math.sin(th) / th * K + (1 - math.cos(th)) / th ** 2 * (K @ K)


@dataclass
class RigidBody:
    """Rigid body with diagonal body-frame inertia; ``omega`` is in the body frame."""

    mass: float
    inertia: np.ndarray
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float).reshape(3)
        if not self.mass > 0 or np.any(self.inertia <= 0):
            raise UsageError("rigid body needs positive mass and inertia")
        for name in ("position", "velocity", "omega"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3).copy())
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3).copy()

    @property
    def omega_world(self) -> np.ndarray:
        return self.rotation @ self.omega


def integrate_rigid(body: RigidBody, forces=(), points=(), torques=(), gravity=(0.0, 0.0, 0.0),
                    dt: float = 1e-3) -> RigidBody:
    """Symplectic Euler step of Newton-Euler equations with the gyroscopic term.

    ``forces`` act at world ``points``; ``torques`` are pure world couples.
    """
    F = np.asarray(gravity, dtype=float) * body.mass
    tau_w = np.zeros(3)
    for f, p in zip(forces, points):
        f = np.asarray(f, dtype=float)
        F = F + f
        tau_w = tau_w + np.cross(np.asarray(p, dtype=float) - body.position, f)
    for t in torques:
        tau_w = tau_w + np.asarray(t, dtype=float)
    v = body.velocity + dt * F / body.mass
    tau_b = body.rotation.T @ tau_w
    I = body.inertia
    w = body.omega
    w = w + dt * (tau_b - np.cross(w, I * w)) / I
    R = body.rotation @ rotation_exp(dt * w)
    return RigidBody(body.mass, I.copy(), body.position + dt * v, R, v, w)


# ------------------------------------------------------------------ distribution

def idw_weights(nodes_xyz: np.ndarray, point, K: int, eps: float = 1e-12):
    """Indices and normalized inverse-distance weights of the ``K`` nearest nodes."""
    if K < 1:
        raise UsageError("K must be at least 1")
    X = np.asarray(nodes_xyz, dtype=float).reshape(-1, 3)
    d = np.linalg.norm(X - np.asarray(point, dtype=float), axis=1)
    K = min(K, len(X))
    idx = np.argpartition(d, K - 1)[:K] if K < len(X) else np.arange(len(X))
    idx = idx[np.argsort(d[idx], kind="stable")]
    scale = max(float(np.max(d[idx])), 1.0)
    w = 1.0 / (d[idx] + eps * scale)
    return idx, w / w.sum()


def distribute_to_nodes(force, point, nodes_xyz, K: int = 8):
    """Split ``force`` over the ``K`` nearest nodes with inverse-distance weights.

    Returns ``(local_indices, nodal_forces)``.  The nearest node takes the
    remainder; a final correction makes the exactly rounded sum of the
    rows (``math.fsum`` per component) equal ``force`` bit for bit.
    """
    idx, w = idw_weights(nodes_xyz, point, K)
    F = np.asarray(force, dtype=float)
    out = w[:, None] * F[None, :]
    out[0] = F - out[1:].sum(axis=0)
    for d in range(3):
        # residuals land on the smallest entry, whose finer spacing can absorb them
        j = int(np.argmin(np.abs(out[:, d])))
        for _ in range(16):
            if math.fsum(out[:, d]) == F[d]:
                break
            r = math.fsum([F[d], *(-out[:, d])])
            if r == 0.0:
                break
            out[j, d] += r
    return idx, out


def exact_sum(rows) -> np.ndarray:
    """Correctly rounded column sums of a ``(k, 3)`` array."""
    rows = np.asarray(rows, dtype=float)
    return np.array([math.fsum(rows[:, d]) for d in range(rows.shape[1])])


def clamp_total(forces, limit: float):
    """Scale a body's patch forces so the magnitude of their sum is at most ``limit``."""
    forces = np.asarray(forces, dtype=float).reshape(-1, 3)
    tot = np.linalg.norm(forces.sum(axis=0))
    if limit > 0 and tot > limit:
        return forces * (limit / tot), limit / tot
    return forces, 1.0


def couple_to_nodes(torque, nodes_xyz):
    """Minimum-norm nodal forces with zero resultant and moment ``torque``."""
    X = np.asarray(nodes_xyz, dtype=float).reshape(-1, 3)
    r = X - X.mean(axis=0)
    J = np.einsum("ij,ij->", r, r) * np.eye(3) - r.T @ r
    tau = np.asarray(torque, dtype=float)
    if np.linalg.matrix_rank(J) < 3:
        return np.zeros_like(X)
    y = np.linalg.solve(J, tau)
    return np.cross(y, r)


# ------------------------------------------------------------------ references

def critical_slope_angle(mu_s: float) -> float:
    return math.atan(mu_s)


def slope_acceleration(alpha: float, mu_k: float, g: float = 9.81) -> float:
    return g * (math.sin(alpha) - mu_k * math.cos(alpha))


def critical_impact_angle(mu_s: float, e: float) -> float:
    return math.atan(3.5 * mu_s * (1 + e))


def tangential_cor(theta: float, mu: float, e: float) -> float:
    return 1.0 - mu * (1 + e) / math.tan(theta)


def post_impact_spin(mu: float, e: float, v_n: float, R: float) -> float:
    return 2.5 * mu * (1 + e) * abs(v_n) / R


@dataclass
class ContactReferences:
    alpha_c: float
    slope_acc: float | None
    a_x: float | None
    a_z: float | None
    theta_star: float | None
    e_t: float | None
    omega: float | None
    sliding: bool | None


def predict_contact_references(mu_s: float, mu_k: float | None = None, alpha: float | None = None,
                               g: float = 9.81, e: float | None = None, theta: float | None = None,
                               v_n: float | None = None, R: float | None = None) -> ContactReferences:
    """Closed-form rigid-body targets for the slope and oblique-impact checks.

    Angles are in radians.  ``sliding`` is ``False`` when ``theta`` lies
    at or below the critical impact angle, where the sliding formulas
    for ``e_t`` and the spin do not apply.
    """
    if mu_s <= 0:
        raise UsageError("friction coefficient must be positive")
    a_c = critical_slope_angle(mu_s)
    acc = ax = az = None
    if alpha is not None and mu_k is not None:
        acc = slope_acceleration(alpha, mu_k, g)
        ax, az = -acc * math.cos(alpha), -acc * math.sin(alpha)
    th_s = et = om = sliding = None
    if e is not None:
        th_s = critical_impact_angle(mu_s, e)
        if theta is not None:
            sliding = theta > th_s
            et = tangential_cor(theta, mu_s, e)
            if not sliding:
                log.info("theta=%.2f deg is in the sticking regime (theta*=%.2f deg)",
                         math.degrees(theta), math.degrees(th_s))
        if v_n is not None and R is not None:
            om = post_impact_spin(mu_s, e, v_n, R)
    return ContactReferences(a_c, acc, ax, az, th_s, et, om, sliding)


# ------------------------------------------------------------------ FE coupling

@dataclass
class BodyInfo:
    """Per-body data needed to turn patch forces into nodal loads."""

    nodes: np.ndarray          # all nodes of the body
    surface_nodes: np.ndarray  # candidate nodes for distribution
    node_mass: np.ndarray      # row-sum masses of ``nodes``
    mass: float
    mass_matrix: object = None  # consistent mass restricted to ``nodes`` (scipy sparse)


def rigid_fit(X, V, m, M=None, return_inertia: bool = False):
    """Mass-weighted centre, velocity and angular velocity of a node cloud.

    With the consistent mass ``M`` the angular momentum and inertia use
    ``M`` products; otherwise the nodal masses ``m`` are used.  With
    ``return_inertia`` the inertia tensor about the centre is appended.
    """
    mt = m.sum()
    c = (m[:, None] * X).sum(axis=0) / mt
    vc = (m[:, None] * V).sum(axis=0) / mt
    r = X - c
    if M is None:
        MV, MR = m[:, None] * (V - vc), m[:, None] * r
    else:
        MV, MR = np.asarray(M @ (V - vc)), np.asarray(M @ r)
    L = np.cross(r, MV).sum(axis=0)
    J = np.einsum("ij,ij->", r, MR) * np.eye(3) - r.T @ MR
    w = np.linalg.solve(J, L) if np.linalg.matrix_rank(J) == 3 else np.zeros(3)
    if return_inertia:
        return c, vc, w, J
    return c, vc, w


def effective_mass(mass: float, inertia, r, direction) -> float:
    """Rigid-body mass seen by a force along ``direction`` applied at offset ``r``."""
    d = np.asarray(direction, dtype=float)
    rd = np.cross(np.asarray(r, dtype=float), d)
    inv = 1.0 / mass
    if np.any(rd != 0):
        inv += float(rd @ np.linalg.lstsq(np.asarray(inertia), rd, rcond=None)[0])
    return 1.0 / inv


@dataclass
class ContactReport:
    n_contacts: int = 0
    total_force: dict = field(default_factory=dict)
    clamped: bool = False
    max_cone_ratio: float = 0.0


class ContactModel:
    """Evaluates patch forces and accumulates them into an external-load vector."""

    def __init__(self, params: ContactParams, bodies: dict, K: int = 8, clamp: float = 50000.0,
                 pair_params: dict | None = None, limit_damping: bool = True):
        if K < 1:
            raise UsageError("distribution parameter K must be at least 1")
        self.params = params
        self.pair_params = pair_params or {}
        self.bodies = bodies
        self.K = K
        self.clamp = clamp
        self.limit_damping = limit_damping
        self.history = ContactHistory()

    def params_for(self, a: int, b: int) -> ContactParams:
        return self.pair_params.get((a, b), self.pair_params.get((b, a), self.params))

    def _rigid_motion(self, body_id, X, V, cache):
        if body_id not in cache:
            b = self.bodies[body_id]
            cache[body_id] = rigid_fit(X[b.nodes], V[b.nodes], b.node_mass, b.mass_matrix, True)
        return cache[body_id]

    def point_velocity(self, body_id, X, V, point, cache):
        """Velocity of the body's best-fit rigid motion at ``point``."""
        c, vc, w, _ = self._rigid_motion(body_id, X, V, cache)
        return vc + np.cross(w, np.asarray(point) - c), w

    def _inverse_mass(self, body_id, point, directions, cache):
        if body_id not in cache:
            return np.zeros(len(directions))
        c, _, _, J = cache[body_id]
        m = self.bodies[body_id].mass
        return np.array([1.0 / effective_mass(m, J, np.asarray(point) - c, d) for d in directions])

    def _effective_masses(self, pc, v_rel, cache):
        n = np.asarray(pc.normal, dtype=float)
        vt = v_rel - (v_rel @ n) * n
        if np.linalg.norm(vt) > 0:
            t = vt / np.linalg.norm(vt)
        else:
            t = np.cross(n, [1.0, 0.0, 0.0] if abs(n[0]) < 0.9 else [0.0, 1.0, 0.0])
            t /= np.linalg.norm(t)
        inv = (self._inverse_mass(pc.body_a, pc.point, (n, t), cache)
               + self._inverse_mass(pc.body_b, pc.point, (n, t), cache))
        return tuple(1.0 / x if x > 0 else math.inf for x in inv)

    def evaluate(self, patches, q, v, dt: float, step: int = 0):
        """Nodal load vector (length of ``q``) for the given patch contacts."""
        X = np.asarray(q, dtype=float).reshape(-1, 3)
        V = np.asarray(v, dtype=float).reshape(-1, 3)
        f = np.zeros_like(X)
        rep = ContactReport(n_contacts=len(patches))
        motions = {}
        loads = {}  # body -> list of (force, point, torque)
        updates = {}
        for pc in patches:
            ba, bb = self.bodies.get(pc.body_a), self.bodies.get(pc.body_b)
            va = vb = wa = wb = np.zeros(3)
            if ba is not None:
                va, wa = self.point_velocity(pc.body_a, X, V, pc.point, motions)
            if bb is not None:
                vb, wb = self.point_velocity(pc.body_b, X, V, pc.point, motions)
            ma = ba.mass if ba is not None else math.inf
            mb = bb.mass if bb is not None else math.inf
            if math.isinf(ma) and math.isinf(mb):
                continue
            m_bar = mb if math.isinf(ma) else ma if math.isinf(mb) else ma * mb / (ma + mb)
            prm = self.params_for(pc.body_a, pc.body_b)
            d_t = self.history.lookup(pc.key, pc.triangles)
            m_eff = self._effective_masses(pc, va - vb, motions) if self.limit_damping else None
            Fn, Ft, tau, d_t = contact_forces(pc.normal, pc.area, pc.depth, va - vb, prm, m_bar, d_t, dt,
                                              wa - wb, m_eff)
            updates[pc.key] = (d_t, pc.triangles)
            pc.d_t = d_t
            fnm = np.linalg.norm(Fn)
            if fnm > 0:
                rep.max_cone_ratio = max(rep.max_cone_ratio, np.linalg.norm(Ft) / fnm)
            F = Fn + Ft
            loads.setdefault(pc.body_a, []).append((F, pc.point, tau))
            loads.setdefault(pc.body_b, []).append((-F, pc.point, -tau))
        self.history.commit(updates, step)
        for body_id, items in loads.items():
            body = self.bodies.get(body_id)
            forces = np.array([it[0] for it in items])
            rep.total_force[body_id] = forces.sum(axis=0)
            if body is None:
                continue
            forces, s = clamp_total(forces, self.clamp)
            rep.clamped |= s < 1.0
            for Fk, (_, p, tau) in zip(forces, items):
                idx, nf = distribute_to_nodes(Fk, p, X[body.surface_nodes], self.K)
                nodes = body.surface_nodes[idx]
                np.add.at(f, nodes, nf)
                if np.any(tau != 0):
                    f[nodes] += s * couple_to_nodes(tau, X[nodes])
        return f.reshape(-1), rep
