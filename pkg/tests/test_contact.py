import math

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from tlfea import contact as ct
from tlfea.errors import UsageError


# ------------------------------------------------------------------ closed forms

def test_critical_slope_angle():
    assert ct.critical_slope_angle(0.25) == pytest.approx(0.2450, abs=5e-5)


def test_slope_acceleration_and_projections():
    ref = ct.predict_contact_references(0.25, mu_k=0.2, alpha=0.25)
    assert ref.slope_acc == pytest.approx(0.526, abs=5e-4)
    assert ref.a_x == pytest.approx(-0.510, abs=5e-4)
    assert ref.a_z == pytest.approx(-0.130, abs=5e-4)


def test_critical_impact_angles():
    assert math.degrees(ct.critical_impact_angle(0.3, 1.0)) == pytest.approx(64.5, abs=0.05)
    assert math.degrees(ct.critical_impact_angle(0.35, 0.9)) == pytest.approx(66.7, abs=0.1)


def test_tangential_cor_and_spin():
    assert ct.tangential_cor(math.radians(80), 0.35, 0.9) == pytest.approx(0.8827, abs=5e-5)
    assert ct.post_impact_spin(0.35, 0.9, -1.0, 0.1) == pytest.approx(2.5 * 0.35 * 1.9 / 0.1)


def test_regime_flag():
    slide = ct.predict_contact_references(0.35, e=0.9, theta=math.radians(80), v_n=1.0, R=0.1)
    stick = ct.predict_contact_references(0.35, e=0.9, theta=math.radians(50), v_n=1.0, R=0.1)
    assert slide.sliding is True and slide.e_t == pytest.approx(0.8827, abs=5e-5)
    assert stick.sliding is False
    with pytest.raises(UsageError):
        ct.predict_contact_references(0.0)


# ------------------------------------------------------------------ force law

def _params(**kw):
    base = dict(k_n=1e8, mu_s=0.5, mu_k=0.4, e=0.5)
    base.update(kw)
    return ct.ContactParams(**base)


def test_params_validation():
    assert _params().k_t == pytest.approx(2 / 7 * 1e8)
    with pytest.raises(UsageError):
        _params(mu_s=0.2, mu_k=0.3)
    with pytest.raises(UsageError):
        _params(e=1.5)


def test_static_normal_force():
    n = np.array([0, 0, 1.0])
    area = 1e-4
    Fn, Ft, tau, d = ct.contact_forces(n, area, 1e-3, np.zeros(3), _params(), 1.0, np.zeros(3), 1e-3)
    a = math.sqrt(area / math.pi)
    assert np.allclose(Fn, [0, 0, a * 1e8 * 1e-3])
    assert np.allclose(Ft, 0) and np.allclose(tau, 0) and np.allclose(d, 0)


def test_separating_dashpot_never_pulls():
    n = np.array([0, 0, 1.0])
    Fn, *_ = ct.contact_forces(n, 1e-4, 1e-9, np.array([0, 0, 50.0]), _params(), 1.0, np.zeros(3), 1e-3)
    assert np.all(Fn == 0)


def test_zero_area_contact_skipped():
    Fn, Ft, tau, d = ct.contact_forces([0, 0, 1.0], 0.0, 1e-3, np.ones(3), _params(), 1.0, np.ones(3), 1e-3)
    assert not Fn.any() and not Ft.any() and not d.any()


@settings(max_examples=200, deadline=None)
@given(vt=st.tuples(*[st.floats(-10, 10)] * 3), depth=st.floats(0, 1e-2),
       hist=st.tuples(*[st.floats(-1e-2, 1e-2)] * 3), nz=st.floats(0.2, 1.0))
@example(vt=(0.0, 0.0, 0.0), depth=2.483784013747708e-166, hist=(0.0, 0.0, 0.0078125), nz=0.25)
def test_coulomb_cone_and_history_tangent(vt, depth, hist, nz):
    n = np.array([math.sqrt(1 - nz * nz), 0.0, nz])
    prm = _params()
    Fn, Ft, _, d = ct.contact_forces(n, 1e-4, depth, np.array(vt), prm, 2.0, np.array(hist), 1e-3)
    # hypot avoids underflow of squared components at tiny depths
    fn = math.hypot(*Fn)
    assert math.hypot(*Ft) <= prm.mu_s * fn + 1e-12 * fn + 1e-300
    dn = np.linalg.norm(d)
    assert abs(d @ n) <= 1e-12 * max(dn, 1e-300) + 1e-30


def test_restitution_damping_zero_for_elastic():
    assert ct.restitution_damping(1e8, 1.0, 0.01, 1.0) == 0.0
    assert ct.restitution_damping(1e8, 0.5, 0.01, 1.0) > 0.0


def test_hertz_helper_rigid_partner():
    p = ct.ContactParams.hertz(1e7, 0.3, 0.9, 0.35)
    assert p.k_n == pytest.approx(4 / 3 * 1e7 / (1 - 0.09))
    G = 1e7 / 2.6
    assert p.k_t == pytest.approx(8 * G / 1.7)


# ------------------------------------------------------------------ distribution

def test_k1_puts_everything_on_nearest():
    X = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]])
    idx, f = ct.distribute_to_nodes([1.0, 2.0, 3.0], [0.9, 0.1, 0], X, K=1)
    assert idx.tolist() == [1] and np.array_equal(f[0], [1.0, 2.0, 3.0])


def test_symmetric_square_gets_quarters():
    X = np.array([[1, 1, 0], [-1, 1, 0], [-1, -1, 0], [1, -1, 0.0]])
    _, f = ct.distribute_to_nodes([4.0, 0.0, -8.0], [0, 0, 0], X, K=4)
    assert np.allclose(f, [[1.0, 0.0, -2.0]] * 4, rtol=1e-14)


def test_distribution_sum_is_exact(rng):
    for _ in range(200):
        X = rng.standard_normal((30, 3))
        F = rng.standard_normal(3) * 10 ** rng.uniform(-3, 4)
        _, f = ct.distribute_to_nodes(F, rng.standard_normal(3), X, K=8)
        assert np.array_equal(ct.exact_sum(f), F)


def test_couple_has_zero_resultant_and_given_moment(rng):
    X = rng.standard_normal((8, 3))
    tau = np.array([0.3, -1.0, 2.0])
    f = ct.couple_to_nodes(tau, X)
    r = X - X.mean(axis=0)
    assert np.allclose(f.sum(axis=0), 0, atol=1e-12)
    assert np.allclose(np.cross(r, f).sum(axis=0), tau)


def test_clamp_total():
    forces = np.array([[3.0, 0, 0], [0, 4.0, 0]])
    out, s = ct.clamp_total(forces, 2.5)
    assert s == pytest.approx(0.5) and np.linalg.norm(out.sum(axis=0)) == pytest.approx(2.5)
    out, s = ct.clamp_total(forces, 10.0)
    assert s == 1.0 and np.array_equal(out, forces)


# ------------------------------------------------------------------ rigid bodies

def test_rigid_fit_recovers_rigid_motion(rng):
    X = rng.standard_normal((20, 3))
    m = rng.random(20) + 0.5
    vc, w = np.array([1.0, -2.0, 0.5]), np.array([0.3, 0.1, -0.7])
    c = (m[:, None] * X).sum(0) / m.sum()
    V = vc + np.cross(w, X - c)
    c2, vc2, w2 = ct.rigid_fit(X, V, m)
    assert np.allclose(c2, c) and np.allclose(vc2, vc) and np.allclose(w2, w)


def test_effective_mass_central_force_is_total_mass():
    assert ct.effective_mass(2.0, np.eye(3), np.zeros(3), [0, 0, 1.0]) == pytest.approx(2.0)
    assert ct.effective_mass(2.0, np.eye(3), [1.0, 0, 0], [0, 0, 1.0]) == pytest.approx(2.0 / 3.0)


def test_rigid_integration_free_spin_conserves_energy():
    body = ct.RigidBody(1.0, [1.0, 2.0, 3.0], omega=[0.0, 0.0, 1.0])
    for _ in range(100):
        body = ct.integrate_rigid(body, dt=1e-3)
    assert np.allclose(body.omega, [0, 0, 1.0])
    assert np.allclose(body.rotation.T @ body.rotation, np.eye(3), atol=1e-12)


def test_rotation_exp_is_orthonormal(rng):
    R = ct.rotation_exp(rng.standard_normal(3))
    assert np.allclose(R.T @ R, np.eye(3)) and np.linalg.det(R) == pytest.approx(1.0)


# ------------------------------------------------------------------ history

def test_history_inherits_by_overlap_and_expires():
    h = ct.ContactHistory()
    h.commit({(0, 5, 1, 9): (np.array([1.0, 0, 0]), frozenset({5, 6, 7}))}, step=1)
    assert np.array_equal(h.lookup((0, 5, 1, 9)), [1.0, 0, 0])
    assert np.array_equal(h.lookup((0, 6, 1, 9), frozenset({6, 7})), [1.0, 0, 0])
    assert np.array_equal(h.lookup((0, 6, 2, 9), frozenset({6, 7})), [0, 0, 0])
    h.commit({}, step=2)
    assert len(h) == 0
