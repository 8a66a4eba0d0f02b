import numpy as np
import pytest

from tlfea import meshgen
from tlfea.assembly import ElasticSystem
from tlfea.core import T10_EDGES
from tlfea.errors import InvertedElementError
from tlfea.materials import MaterialParams
from tlfea.precompute import keast5, precompute_elements, t10_shape, t10_shape_grad, tet14

CORNERS = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])


def _node_xi():
    mids = [(CORNERS[a] + CORNERS[b]) / 2 for a, b in T10_EDGES]
    return np.vstack([CORNERS, mids])


def test_shape_functions_are_kronecker_at_nodes():
    N = np.array([t10_shape(x) for x in _node_xi()])
    assert np.allclose(N, np.eye(10), atol=1e-14)


@pytest.mark.parametrize("xi", [(0.1, 0.2, 0.3), (0.25, 0.25, 0.25), (0.0, 0.5, 0.1)])
def test_partition_of_unity_and_gradient_sum(xi):
    assert t10_shape(xi).sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(t10_shape_grad(xi).sum(axis=0), 0.0, atol=1e-13)


def test_shape_gradient_matches_finite_differences():
    xi = np.array([0.2, 0.15, 0.3])
    fd = np.empty((10, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = 1e-6
        fd[:, j] = (t10_shape(xi + e) - t10_shape(xi - e)) / 2e-6
    assert np.allclose(fd, t10_shape_grad(xi), atol=1e-8)


@pytest.mark.parametrize("rule,degree", [(keast5(), 3), (tet14(), 5)])
def test_quadrature_integrates_monomials(rule, degree):
    from math import factorial
    assert rule.weights.sum() == pytest.approx(1 / 6, rel=1e-13)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            c = degree - a - b
            exact = factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)
            p = rule.points
            val = (rule.weights * p[:, 0] ** a * p[:, 1] ** b * p[:, 2] ** c).sum()
            assert val == pytest.approx(exact, rel=1e-12, abs=1e-15)


def test_volumes_and_mass_total(beam):
    pre = precompute_elements(beam, 2700.0)
    assert pre.volumes.sum() == pytest.approx(6.0, rel=1e-13)
    assert pre.mass_coeffs.sum() == pytest.approx(2700.0 * 6.0, rel=1e-13)


def test_mass_matrix_is_spd():
    for mesh in (meshgen.two_element_mesh(), meshgen.cantilever_mesh(0), meshgen.sphere_mesh(0.1, 2)):
        M = ElasticSystem(mesh, MaterialParams.svk(1e6, 0.3, 1000.0)).M.toarray()
        assert np.allclose(M, M.T)
        assert np.linalg.eigvalsh(M).min() > 0


def test_keast_mass_is_available_but_indefinite():
    mesh = meshgen.two_element_mesh()
    pre = precompute_elements(mesh, 1.0, mass_exact=False)
    assert np.linalg.eigvalsh(pre.mass_coeffs[0]).min() < 0


def test_inverted_element_is_reported():
    mesh = meshgen.two_element_mesh()
    nodes = mesh.nodes.copy()
    nodes[:, 2] *= -1.0
    mesh.nodes = nodes
    with pytest.raises(InvertedElementError):
        precompute_elements(mesh, 1.0)


def test_reference_gradients_reproduce_identity(beam):
    pre = precompute_elements(beam, 1.0)
    F = np.einsum("eai,eqaj->eqij", beam.nodes[beam.elements], pre.grads)
    assert np.allclose(F, np.eye(3), atol=1e-12)
