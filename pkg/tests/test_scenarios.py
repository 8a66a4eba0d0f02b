import math

import numpy as np
import pytest

from tlfea import config as cfgmod
from tlfea import io
from tlfea.errors import ConfigError
from tlfea.scenarios import build, load_scenario, run_scenario, slope_normal


def test_slope_normal_is_unit_and_tilted():
    n = np.array(slope_normal(0.25))
    assert np.linalg.norm(n) == pytest.approx(1.0)
    assert math.acos(n[2]) == pytest.approx(0.25)
    brick = cfgmod.load_preset("brick")
    assert np.allclose(brick.get("contact", "plane_normal"), slope_normal(0.25), rtol=1e-15)


@pytest.mark.parametrize("name,limit", [("brick", 500), ("oblique_exp2", 1500), ("joint_pull_revolute", 300),
                                        ("joint_pull_spherical", 300)])
def test_coarse_meshes_stay_under_element_budgets(name, limit):
    scn = load_scenario(name)
    for body in scn.body_ids.values():
        n_el = int((scn.mesh.element_body() == body).sum())
        assert 0 < n_el <= limit


def test_cantilever_preset_mesh_and_clamp():
    scn = load_scenario("cantilever_svk")
    assert (scn.mesh.n_nodes, scn.mesh.n_elements, scn.mesh.n_dofs) == (105, 36, 315)
    assert scn.joint_names == ["clamp"]
    clamped = np.flatnonzero(scn.mesh.nodes[:, 0] == 0.0)
    assert scn.system.cset.m == 3 * len(clamped)


def test_oblique_sphere_mass_is_one_kilogram():
    scn = load_scenario("oblique_exp2")
    assert scn.system.node_mass.sum() == pytest.approx(1.0, rel=1e-12)


def test_joint_links_have_tabulated_mass():
    scn = load_scenario("joint_pull_spherical")
    for body in scn.body_ids.values():
        assert scn.system.body_mass(body) == pytest.approx(0.96, rel=1e-12)


def test_overrides_apply():
    scn = load_scenario("cantilever_svk", {"solver.method": "adamw", "time.n_steps": "4"})
    assert scn.n_steps == 4
    assert scn.config.get("solver", "method") == "adamw"


@pytest.mark.parametrize("edit,fragment", [
    (lambda c: c.blocks["body"].clear(), "no [body] block"),
    (lambda c: c.blocks["body"][0].pop("E"), "svk needs"),
    (lambda c: c.blocks["joint"][0].update(body="nobody"), "unknown body"),
    (lambda c: c.blocks["load"][0].update(select_min=(9.0, 9.0, 9.0)), "selects no nodes"),
    (lambda c: c.sections["time"].pop("h"), "time.h"),
])
def test_build_errors(edit, fragment):
    cfg = cfgmod.load_preset("cantilever_svk")
    edit(cfg)
    with pytest.raises(ConfigError, match=fragment.replace("[", r"\[").replace("]", r"\]")):
        build(cfg)


def test_mesh_file_body(tmp_path, beam):
    io.save_mesh(beam, tmp_path / "beam.tlmesh")
    cfg = cfgmod.load_preset("cantilever_svk")
    blk = cfg.blocks["body"][0]
    blk.pop("shape")
    blk.pop("res")
    blk["mesh"] = "beam.tlmesh"
    text = cfgmod.dumps(cfg)
    (tmp_path / "beam.cfg").write_text(text)
    scn = load_scenario(str(tmp_path / "beam.cfg"))
    assert scn.mesh.n_elements == 36


def test_run_scenario_without_files():
    scn = load_scenario("joint_motion_spherical")
    out = run_scenario(scn, n_steps=5, write_files=False)
    assert out.csv_path is None and out.vtk_files == []
    assert len(out.result.reports) == 5 and out.result.all_converged
    assert set(out.reactions) == set(scn.joint_names)
    for rep in out.result.reports:
        assert rep.constraint_norm <= scn.config.get("solver", "eps_out")
