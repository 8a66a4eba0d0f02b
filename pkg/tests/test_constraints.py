import numpy as np
import pytest

from tlfea import meshgen
from tlfea.constraints import CdConstraint, ConstraintSet, Dp1Constraint, add_clamp, make_revolute, make_spherical
from tlfea.errors import SolverStateError, UsageError


@pytest.fixture
def links():
    up = meshgen.box_mesh((0.04, 0.04, 0.5), (1, 1, 2), origin=(-0.02, -0.02, 0.2), body=0)
    lo = meshgen.box_mesh((0.04, 0.04, 0.5), (1, 1, 2), origin=(-0.02, -0.02, -0.3), body=1)
    return meshgen.merge_meshes(up, lo)


def _nearest(X, ids, p):
    return int(ids[np.argmin(np.linalg.norm(X[ids] - p, axis=1))])


def _joints(mesh):
    X = mesh.nodes
    up, lo = mesh.nodes_of_body(0), mesh.nodes_of_body(1)
    cs = ConstraintSet(mesh.n_dofs, rho=1e3)
    make_spherical(cs, "top", X, _nearest(X, up, (0, 0, 0.7)))
    a, b = _nearest(X, up, (0, 0, 0.2)), _nearest(X, lo, (0, 0, 0.2))
    tl = [(_nearest(X, lo, (0, 0, 0.2)), _nearest(X, lo, (0, 0, -0.05))),
          (_nearest(X, lo, (-0.02, 0, 0.2)), _nearest(X, lo, (0.02, 0, 0.2)))]
    axis = (_nearest(X, up, (0, -0.02, 0.2)), _nearest(X, up, (0, 0.02, 0.2)))
    make_revolute(cs, "hinge", X, b, tl, axis, node_a=a)
    return cs.finalize()


def test_reference_configuration_satisfies_joints(links):
    cs = _joints(links)
    assert cs.m == 3 + 5
    assert np.abs(cs.evaluate(links.nodes.reshape(-1))).max() < 1e-12


def test_jacobian_matches_finite_differences(links, rng):
    cs = _joints(links)
    q = links.nodes.reshape(-1) + 0.01 * rng.standard_normal(links.n_dofs)
    J = cs.jacobian(q).toarray()
    fd = np.empty_like(J)
    for k in range(len(q)):
        qp, qm = q.copy(), q.copy()
        qp[k] += 1e-6
        qm[k] -= 1e-6
        fd[:, k] = (cs.evaluate(qp) - cs.evaluate(qm)) / 2e-6
    assert np.allclose(J, fd, atol=1e-8)


def test_rigid_rotation_about_hinge_keeps_dp1_rows(links):
    cs = _joints(links)
    X = links.nodes.copy()
    lo = links.nodes_of_body(1)
    th = 0.3
    R = np.array([[np.cos(th), 0, np.sin(th)], [0, 1, 0], [-np.sin(th), 0, np.cos(th)]])
    pivot = np.array([0, 0, 0.2])
    X[lo] = (X[lo] - pivot) @ R.T + pivot
    c = cs.evaluate(X.reshape(-1))
    assert np.abs(c[3:]).max() < 1e-12


def test_clamp_with_moving_target():
    X = np.zeros((1, 3))
    cs = ConstraintSet(3, rho=1.0)
    add_clamp(cs, [0], X, target=lambda n, d: (lambda t: t * (d + 1)))
    cs.finalize()
    assert np.allclose(cs.evaluate(np.zeros(3), 2.0), [-2.0, -4.0, -6.0])


def test_split_evaluation_matches_direct(links, rng):
    cs = _joints(links)
    qb = links.nodes.reshape(-1) + 1e3
    dq = 1e-9 * rng.standard_normal(links.n_dofs)
    assert np.allclose(cs.evaluate(qb + dq, q_base=qb, dq=dq), cs.evaluate(qb + dq), atol=1e-9)


def test_pattern_frozen_after_finalize():
    cs = ConstraintSet(6)
    cs.add(CdConstraint("anchor", 0, 0))
    cs.finalize()
    with pytest.raises(UsageError):
        cs.add(CdConstraint("anchor", 1, 0))


def test_invalid_rows():
    with pytest.raises(UsageError):
        CdConstraint("pair", 0, 0)
    with pytest.raises(UsageError):
        CdConstraint("anchor", 0, 4)
    with pytest.raises(UsageError):
        Dp1Constraint(0, 1)
    with pytest.raises(UsageError):
        ConstraintSet(3, rho=0.0)


def test_reaction_from_multipliers_and_step_guard():
    cs = ConstraintSet(3, rho=10.0)
    make_spherical(cs, "pin", np.zeros((1, 3)), 0)
    cs.finalize()
    cs.lam[:] = [1.0, 2.0, 3.0]
    c = np.array([0.1, 0.0, -0.1])
    assert np.allclose(cs.joint_reaction("pin", 0.5, c), 0.5 * (cs.lam + 10.0 * c))
    cs.in_step = True
    with pytest.raises(SolverStateError):
        cs.joint_reaction("pin", 0.5, c)


def test_duplicate_joint_name():
    cs = ConstraintSet(3)
    make_spherical(cs, "a", np.zeros((1, 3)), 0)
    with pytest.raises(UsageError):
        make_spherical(cs, "a", np.zeros((1, 3)), 0)
