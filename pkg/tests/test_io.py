import numpy as np
import pytest

from tlfea import io, meshgen
from tlfea.assembly import ElasticSystem
from tlfea.core import SystemState
from tlfea.errors import InvalidMeshError
from tlfea.materials import MaterialParams

meshio = pytest.importorskip("meshio")

ONE_TET = """tlmesh 1
# a single quadratic tetrahedron
nodes 10
0 0 0
1 0 0
0 1 0
0 0 1
0.5 0 0
0.5 0.5 0
0 0.5 0
0 0 0.5
0.5 0 0.5
0 0.5 0.5
tets10 1
0 1 2 3 4 5 6 7 8 9
"""


def _one_tet_mesh():
    corners = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])
    nodes, elems = meshgen.t10_from_tets(corners, np.array([[0, 1, 2, 3]]))
    return meshgen._finish(nodes, elems, 0)


def test_one_tet_file_loads(tmp_path):
    p = tmp_path / "one.tlmesh"
    p.write_text(ONE_TET)
    mesh = io.load_mesh(p)
    assert (mesh.n_nodes, mesh.n_elements, mesh.n_dofs) == (10, 1, 30)
    assert len(mesh.triangles) == 0
    info = io.mesh_info(mesh)
    assert info.volume == pytest.approx(1 / 6)


def test_round_trip_preserves_mesh(tmp_path):
    mesh = meshgen.merge_meshes(_one_tet_mesh(), meshgen.box_mesh((1, 1, 1), (1, 1, 1), origin=(3, 0, 0), body=1))
    p = tmp_path / "two.tlmesh"
    io.save_mesh(mesh, p)
    back = io.load_mesh(p)
    assert np.array_equal(back.nodes, mesh.nodes)
    assert np.array_equal(back.elements, mesh.elements)
    assert np.array_equal(back.body_of_node, mesh.body_of_node)
    assert sorted(map(tuple, back.triangles)) == sorted(map(tuple, mesh.triangles))


def test_res0_beam_counts(tmp_path, beam):
    p = tmp_path / "beam.tlmesh"
    io.save_mesh(beam, p)
    info = io.mesh_info(io.load_mesh(p))
    assert (info.n_nodes, info.n_elements, info.n_dofs) == (105, 36, 315)
    assert info.volume == pytest.approx(6.0)


def test_flipped_winding_rejected(tmp_path):
    mesh = _one_tet_mesh()
    mesh.triangles[0] = mesh.triangles[0, ::-1]
    p = tmp_path / "flip.tlmesh"
    io.save_mesh(mesh, p)
    with pytest.raises(InvalidMeshError):
        io.load_mesh(p)


@pytest.mark.parametrize("text,line", [
    ("tlmesh 2\n", 1),
    ("tlmesh 1\nnodes x\n", 2),
    ("tlmesh 1\nnodes 1\n0 0\n", 3),
    ("tlmesh 1\nnodes 1\n0 0 zero\n", 3),
    ("tlmesh 1\nnodes 1\n0 0 0\nelements 0\n", 4),
])
def test_format_errors_name_the_line(tmp_path, text, line):
    p = tmp_path / "bad.tlmesh"
    p.write_text(text)
    with pytest.raises(io.MeshFormatError) as info:
        io.load_mesh(p)
    assert info.value.line == line
    assert f":{line}:" in str(info.value)


def test_truncated_file(tmp_path):
    p = tmp_path / "short.tlmesh"
    p.write_text("tlmesh 1\nnodes 3\n0 0 0\n")
    with pytest.raises(io.MeshFormatError):
        io.load_mesh(p)


def test_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError):
        io.load_mesh(tmp_path / "absent.tlmesh")


def _beam_system(beam):
    mat = MaterialParams.svk(7e8, 0.33, 2700.0)
    return ElasticSystem(beam, {0: mat})


def test_vtk_readable_with_quadratic_tets(tmp_path, beam):
    system = _beam_system(beam)
    q = beam.nodes.reshape(-1).copy()
    v = np.arange(q.size, dtype=float)
    p = tmp_path / "state.vtk"
    io.write_state_vtk(p, system, SystemState(q, v, 0.0))
    m = meshio.read(p)
    assert "tetra10" in m.cells_dict
    assert m.cells_dict["tetra10"].shape == (36, 10)
    assert np.array_equal(m.cells_dict["tetra10"], beam.elements)
    assert np.allclose(m.points, beam.nodes)
    assert np.allclose(m.point_data["velocity"], v.reshape(-1, 3))
    assert np.all(m.point_data["von_mises"] == 0.0)
    text = p.read_text()
    assert "CELL_TYPES 36\n" + "24\n" * 36 in text


def test_von_mises_positive_under_stretch(beam):
    system = _beam_system(beam)
    X = beam.nodes.copy()
    X[:, 0] *= 1.01
    vm = io.nodal_von_mises(system, X.reshape(-1))
    assert np.all(vm > 0)


def test_metrics_csv_columns(tmp_path):
    from tlfea.solvers import StepReport

    p = tmp_path / "m.csv"
    with io.MetricsWriter(p) as w:
        rep = StepReport(step=1, t=1e-3)
        w.write(rep)
    rows = io.read_metrics(p)
    assert tuple(rows[0].keys()) == io.METRICS_COLUMNS
    assert rows[0]["step"] == "1" and float(rows[0]["t"]) == 1e-3
    for col in io.METRICS_COLUMNS:
        assert col.isascii()


def test_output_error_on_bad_directory(tmp_path, beam):
    with pytest.raises(OSError):
        io.write_vtk(tmp_path / "nope" / "x.vtk", beam, beam.nodes, beam.nodes)
