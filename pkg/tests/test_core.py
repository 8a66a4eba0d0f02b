import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tlfea import meshgen
from tlfea.core import Mesh, SystemState, corner_volumes, dof_components, dof_index, step_map
from tlfea.errors import InvalidMeshError, UsageError


def test_dof_index_roundtrip():
    for I in range(5):
        for d in range(3):
            assert dof_components(dof_index(I, d)) == (I, d)
    assert dof_index(2, 1) == 7


def test_dof_index_rejects_bad_component():
    with pytest.raises(UsageError):
        dof_index(0, 3)


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 9, elements=finite), arrays(float, 9, elements=finite), arrays(float, 9, elements=finite),
       st.floats(1e-6, 1.0), st.floats(-10, 10))
def test_step_map_is_affine_in_velocity(q, v1, v2, h, a):
    lhs = step_map(q, a * v1 + v2, h) - q
    rhs = a * (step_map(q, v1, h) - q) + (step_map(q, v2, h) - q)
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-9)


def test_step_map_rejects_nonpositive_h():
    with pytest.raises(UsageError):
        step_map(np.zeros(3), np.zeros(3), 0.0)


def test_corner_volume_of_unit_tet():
    X = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])
    assert corner_volumes(X, np.array([[0, 1, 2, 3]]))[0] == pytest.approx(1 / 6)


def test_mesh_validation_rejects_inverted_element():
    m = meshgen.two_element_mesh()
    el = m.elements.copy()
    el[0, [1, 2]] = el[0, [2, 1]]
    el[0, [4, 6, 8, 9]] = el[0, [6, 4, 9, 8]]
    with pytest.raises(InvalidMeshError):
        Mesh(m.nodes, el, m.triangles, m.triangle_body, m.body_of_node).validate()


def test_mesh_validation_rejects_out_of_range_index():
    m = meshgen.two_element_mesh()
    el = m.elements.copy()
    el[1, 9] = m.n_nodes
    with pytest.raises(InvalidMeshError):
        Mesh(m.nodes, el, m.triangles, m.triangle_body, m.body_of_node).validate()


def test_res0_counts(beam):
    assert (beam.n_nodes, beam.n_elements, beam.n_dofs) == (105, 36, 315)


def test_state_rejects_nonfinite():
    with pytest.raises(UsageError):
        SystemState(np.array([0.0, np.nan, 0.0]), np.zeros(3))
    with pytest.raises(UsageError):
        SystemState(np.zeros(3), np.zeros(6))
