import numpy as np
import pytest

from tlfea import meshgen
from tlfea.assembly import ElasticSystem
from tlfea.constraints import ConstraintSet, add_clamp, make_spherical
from tlfea.core import SystemState
from tlfea.errors import NotPositiveDefiniteError, UsageError
from tlfea.materials import MaterialParams
from tlfea.solvers import (AdamWConfig, NewtonConfig, SolverConfig, StepReport, alm_step,
                           make_inner_solver)
from tlfea.validation import cantilever_tip


def _free_fall(method="newton"):
    mesh = meshgen.two_element_mesh()
    s = ElasticSystem(mesh, MaterialParams.svk(1e5, 0.3, 1000.0), gravity=(0, 0, -9.81))
    cfg = SolverConfig(method=method, eps_in=1e-8,
                       adamw=AdamWConfig(alpha=1e-3, schedule="exponential", decay=0.998, max_inner=20000))
    return s, cfg, SystemState.at_rest(mesh)


@pytest.mark.parametrize("method", ["newton", "adamw"])
def test_free_fall_step(method):
    s, cfg, st = _free_fall(method)
    h = 1e-3
    new, rep = alm_step(st, s, cfg, h, step=1)
    assert rep.converged
    assert np.allclose(new.v.reshape(-1, 3), [0, 0, -9.81 * h], atol=1e-6)
    assert np.allclose(new.q, st.q + h * new.v)
    assert new.t == pytest.approx(h)


def test_newton_and_adamw_agree_tightly_on_cantilever():
    tn, rn = cantilever_tip("newton", 1e-10, n_steps=3)
    ta, ra = cantilever_tip("adamw", 1e-10, n_steps=3)
    assert np.linalg.norm(ta - tn) <= 1e-6 * np.linalg.norm(tn)


def test_step_report_counts_one_factorization_per_run():
    s, cfg, st = _free_fall()
    inner = make_inner_solver(cfg)
    reps = []
    for k in range(4):
        st, rep = alm_step(st, s, cfg, 1e-3, inner=inner, step=k + 1)
        reps.append(rep)
    assert sum(r.factorizations for r in reps) == 1
    assert all(isinstance(r, StepReport) for r in reps)
    assert set(reps[0].as_dict()) >= {"step", "t", "outer_iters", "inner_iters_total", "grad_norm",
                                      "constraint_norm", "converged"}


def test_alm_enforces_pin():
    mesh = meshgen.two_element_mesh()
    cs = ConstraintSet(mesh.n_dofs, rho=1e12)
    make_spherical(cs, "pin", mesh.nodes, 0)
    s = ElasticSystem(mesh, MaterialParams.svk(1e5, 0.3, 1000.0), gravity=(0, 0, -9.81), constraints=cs)
    cfg = SolverConfig(eps_in=1e-8, eps_out=1e-10, max_outer=30)
    st = SystemState.at_rest(mesh)
    inner = make_inner_solver(cfg)
    for k in range(3):
        st, rep = alm_step(st, s, cfg, 1e-3, inner=inner, step=k + 1)
        assert rep.converged and rep.constraint_norm <= 1e-10
    assert np.abs(st.q[:3] - mesh.nodes[0]).max() <= 1e-10


def test_multipliers_persist_between_steps():
    mesh = meshgen.two_element_mesh()
    cs = ConstraintSet(mesh.n_dofs, rho=1e10)
    add_clamp(cs, [0, 1, 2], mesh.nodes)
    s = ElasticSystem(mesh, MaterialParams.svk(1e5, 0.3, 1000.0), gravity=(0, 0, -9.81), constraints=cs)
    cfg = SolverConfig(eps_in=1e-8, eps_out=1e-9, max_outer=30)
    st = SystemState.at_rest(mesh)
    inner = make_inner_solver(cfg)
    st, r1 = alm_step(st, s, cfg, 1e-3, inner=inner)
    lam1 = cs.lam.copy()
    st, r2 = alm_step(st, s, cfg, 1e-3, inner=inner)
    assert np.any(lam1 != 0)
    assert r2.outer_iters <= r1.outer_iters


def test_restore_on_line_search_failure_keeps_iterate():
    s, cfg, st = _free_fall()
    cfg = SolverConfig(eps_in=1e-30, max_inner=3, newton=NewtonConfig(j_max=0, on_failure="restore"))
    new, rep = alm_step(st, s, cfg, 1e-3)
    assert np.all(np.isfinite(new.v))


def test_config_validation():
    with pytest.raises(UsageError):
        SolverConfig(method="cg")
    with pytest.raises(UsageError):
        SolverConfig(eps_in=0.0)
    with pytest.raises(UsageError):
        NewtonConfig(c1=1.5)
    with pytest.raises(UsageError):
        AdamWConfig(schedule="cosine")
    with pytest.raises(UsageError):
        AdamWConfig(max_inner=0)


def test_adamw_schedule():
    a = AdamWConfig(alpha=1e-2, schedule="exponential", decay=0.5, alpha_min=1e-3)
    assert a.step_size(1) == 1e-2
    assert a.step_size(2) == 5e-3
    assert a.step_size(20) == 1e-3


def test_indefinite_hessian_error_names_time_step():
    mesh = meshgen.two_element_mesh()
    s = ElasticSystem(mesh, MaterialParams.svk(1e9, 0.3, 1.0))
    q = mesh.nodes.reshape(-1).copy()
    q[2::3] *= 0.1  # heavily compressed: negative tangent
    st = SystemState(q, np.zeros_like(q))
    cfg = SolverConfig(eps_in=1e-30, max_inner=2)
    try:
        alm_step(st, s, cfg, 10.0)
    except NotPositiveDefiniteError as err:
        assert "time step" in str(err)
