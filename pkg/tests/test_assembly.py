import numpy as np
import pytest

from tlfea import meshgen
from tlfea.assembly import ElasticSystem
from tlfea.constraints import ConstraintSet, add_clamp
from tlfea.materials import MaterialParams
from tlfea.validation import check_gradient, check_hessian


def _system(mesh, **kw):
    return ElasticSystem(mesh, MaterialParams.svk(E=1e6, nu=0.3, density=1000.0, **kw))


def test_internal_force_vanishes_at_reference(beam):
    s = _system(beam)
    f = s.internal_force(beam.nodes.reshape(-1), np.zeros(beam.n_dofs))
    assert np.abs(f).max() < 1e-8


def test_internal_force_is_equilibrated(beam, rng):
    s = _system(beam, eta_damp=5.0, lambda_damp=2.0)
    q = beam.nodes.reshape(-1) + 1e-3 * rng.standard_normal(beam.n_dofs)
    f = s.internal_force(q, rng.standard_normal(beam.n_dofs)).reshape(-1, 3)
    assert np.allclose(f.sum(axis=0), 0.0, atol=1e-8 * np.abs(f).max())


def test_internal_force_is_energy_gradient(rng):
    mesh = meshgen.two_element_mesh()
    s = _system(mesh)
    q = mesh.nodes.reshape(-1) + 0.02 * rng.standard_normal(mesh.n_dofs)
    f = s.internal_force(q, np.zeros(mesh.n_dofs)).copy()
    fd = np.empty_like(f)
    for i in range(len(q)):
        qp, qm = q.copy(), q.copy()
        qp[i] += 1e-7
        qm[i] -= 1e-7
        fd[i] = (s.strain_energy_total(qp) - s.strain_energy_total(qm)) / 2e-7
    assert np.linalg.norm(f - fd) <= 1e-6 * np.linalg.norm(fd)


def test_gradient_and_hessian_oracles():
    assert check_gradient(n_states=5).passed
    assert check_hessian().passed


def test_hessian_is_symmetric_and_positive_definite(beam, rng):
    s = _system(beam, eta_damp=3.0, lambda_damp=3.0)
    q_n = beam.nodes.reshape(-1)
    v = 1e-2 * rng.standard_normal(beam.n_dofs)
    s.evaluate(v, q_n, np.zeros_like(v), 1e-3, 1e-3, np.zeros_like(v))
    H = s.hessian(v, q_n, 1e-3).toarray()
    assert np.allclose(H, H.T, rtol=0, atol=1e-9 * np.abs(H).max())
    assert np.linalg.eigvalsh(H).min() > 0


def test_hessian_pattern_is_shared_between_calls(beam):
    cset = ConstraintSet(beam.n_dofs, rho=1e6)
    add_clamp(cset, np.flatnonzero(beam.nodes[:, 0] < 1e-9), beam.nodes)
    s = ElasticSystem(beam, MaterialParams.svk(7e8, 0.33, 2700.0), constraints=cset)
    v = np.zeros(beam.n_dofs)
    q = beam.nodes.reshape(-1)
    s.evaluate(v, q, v, 1e-3, 1e-3, v)
    H1 = s.hessian(v, q, 1e-3)
    H2 = s.hessian(v + 1.0, q, 1e-3)
    assert H1.indptr is H2.indptr and H1.indices is H2.indices


def test_mass_and_gravity(beam):
    s = ElasticSystem(beam, MaterialParams.svk(7e8, 0.33, 2700.0), gravity=(0, 0, -9.81))
    assert s.node_mass.sum() == pytest.approx(2700.0 * 6.0, rel=1e-12)
    assert s.f_ff.reshape(-1, 3).sum(axis=0) == pytest.approx([0, 0, -9.81 * 2700 * 6.0], rel=1e-12)


def test_multi_body_materials_and_accumulation_modes(rng):
    a = meshgen.box_mesh((1, 1, 1), (1, 1, 1), body=0)
    b = meshgen.box_mesh((1, 1, 1), (1, 1, 1), origin=(2, 0, 0), body=1)
    mesh = meshgen.merge_meshes(a, b)
    mats = {0: MaterialParams.svk(1e6, 0.3, 1000.0), 1: MaterialParams.mooney_rivlin(1e5, 1e4, kappa=1e6)}
    q = mesh.nodes.reshape(-1) + 1e-3 * rng.standard_normal(mesh.n_dofs)
    v = np.zeros_like(q)
    f1 = ElasticSystem(mesh, mats, accumulation="reduce").internal_force(q, v)
    f2 = ElasticSystem(mesh, mats, accumulation="scatter").internal_force(q, v)
    assert np.allclose(f1, f2, rtol=1e-12, atol=1e-9)
