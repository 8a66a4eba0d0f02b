"""Build runnable simulations from :class:`~tlfea.config.Config` objects.

A scenario owns the merged mesh of all bodies, their materials, the
constraint set, loads, optional contact pieces, solver settings and the
initial state.  :func:`run_scenario` advances it and writes the VTK series,
metrics CSV and a JSON report.
"""
from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import config as cfgmod
from . import meshgen
from .assembly import ElasticSystem
from .collision import BroadPhase, TriangleSoup
from .constraints import ConstraintSet, add_clamp, make_revolute, make_spherical
from .contact import BodyInfo, ContactModel, ContactParams
from .core import Mesh, SystemState
from .errors import ConfigError
from .io import MetricsWriter, load_mesh, write_state_vtk
from .materials import MaterialParams
from .pipeline import AsyncConfig, ContactSetup, Load, Simulation, SimulationResult
from .precompute import precompute_elements
from .solvers import AdamWConfig, NewtonConfig, SolverConfig

log = logging.getLogger(__name__)

GROUND = "ground"
_SELECT_TOL = 1e-9


@dataclass
class Scenario:
    """Everything needed to run one configured simulation."""

    name: str
    config: cfgmod.Config
    mesh: Mesh
    system: ElasticSystem
    simulation: Simulation
    initial_state: SystemState
    n_steps: int
    body_ids: dict
    joint_names: list = field(default_factory=list)
    phases: list = field(default_factory=list)
    contact: ContactSetup | None = None

    @property
    def h(self) -> float:
        return self.simulation.h

    def body_nodes(self, name: str) -> np.ndarray:
        return self.mesh.nodes_of_body(self.body_ids[name])


def _base_dir(cfg):
    return os.path.dirname(os.path.abspath(cfg.source)) if cfg.source else os.getcwd()


def _body_mesh(block, body_id, base) -> Mesh:
    if "mesh" in block and "shape" in block:
        raise ConfigError(f"body '{block.get('name')}': give either body.mesh or body.shape")
    if "mesh" in block:
        path = block["mesh"]
        if not os.path.isabs(path):
            path = os.path.join(base, path)
        m = load_mesh(path)
        return Mesh(m.nodes, m.elements, m.triangles, np.full(len(m.triangles), body_id),
                    np.full(m.n_nodes, body_id))
    shape = block.get("shape")
    if shape == "box":
        m = meshgen.box_mesh(block.get("size", (1.0, 1.0, 1.0)), block.get("divisions", (1, 1, 1)),
                             block.get("origin", (0.0, 0.0, 0.0)), body=body_id)
    elif shape == "sphere":
        m = meshgen.sphere_mesh(block.get("radius", 1.0), block.get("n", 4), block.get("center", (0.0, 0.0, 0.0)),
                                body=body_id)
    elif shape == "cantilever":
        m = meshgen.cantilever_mesh(block.get("res", 0))
        m = Mesh(m.nodes, m.elements, m.triangles, np.full(len(m.triangles), body_id), np.full(m.n_nodes, body_id))
    else:
        raise ConfigError(f"body '{block.get('name')}' needs body.mesh or body.shape")
    if "rotate_y" in block:
        m = meshgen.rotate_mesh(m, meshgen.rotation_y(block["rotate_y"]))
    return m


def _material(block, mesh_b: Mesh) -> MaterialParams:
    kind = block.get("material", "svk")
    density = block.get("density", 1000.0)
    if "mass" in block:
        vol = float(precompute_elements(mesh_b, 1.0).volumes.sum())
        density = block["mass"] / vol
    eta, lam = block.get("eta_damp", 0.0), block.get("lambda_damp", 0.0)
    if kind == "svk":
        if "E" not in block or "nu" not in block:
            raise ConfigError(f"body '{block.get('name')}': svk needs body.E and body.nu")
        return MaterialParams.svk(block["E"], block["nu"], density, eta, lam)
    if not all(k in block for k in ("C10", "C01", "kappa")):
        raise ConfigError(f"body '{block.get('name')}': mooney_rivlin needs body.C10, body.C01, body.kappa")
    return MaterialParams.mooney_rivlin(block["C10"], block["C01"], kappa=block["kappa"], density=density,
                                        eta_damp=eta, lambda_damp=lam)


def _select(mesh: Mesh, body_id: int, lo, hi, what: str) -> np.ndarray:
    ids = mesh.nodes_of_body(body_id)
    X = mesh.nodes[ids]
    scale = _SELECT_TOL * (1.0 + np.abs(mesh.nodes).max())
    inside = np.all((X >= np.asarray(lo) - scale) & (X <= np.asarray(hi) + scale), axis=1)
    sel = ids[inside]
    if len(sel) == 0:
        raise ConfigError(f"{what}: selection box selects no nodes")
    return sel


def _nearest(mesh: Mesh, body_id: int, p) -> int:
    ids = mesh.nodes_of_body(body_id)
    return int(ids[np.argmin(np.linalg.norm(mesh.nodes[ids] - np.asarray(p), axis=1))])


def _body_ref(name, body_ids, what):
    if name not in body_ids:
        raise ConfigError(f"{what}: unknown body '{name}'")
    return body_ids[name]


def _build_joints(cfg, mesh, body_ids, cset):
    names = []
    for k, jb in enumerate(cfg.blocks["joint"]):
        name = jb.get("name", f"joint{k}")
        kind = jb.get("type")
        if kind is None:
            raise ConfigError(f"joint '{name}' needs joint.type")
        child = _body_ref(jb.get("body"), body_ids, f"joint '{name}'")
        parent = jb.get("parent", GROUND)
        pid = None if parent == GROUND else _body_ref(parent, body_ids, f"joint '{name}'")
        X = mesh.nodes
        if kind == "clamp":
            if "select_min" not in jb or "select_max" not in jb:
                raise ConfigError(f"joint '{name}': clamp needs joint.select_min and joint.select_max")
            add_clamp(cset, _select(mesh, child, jb["select_min"], jb["select_max"], f"joint '{name}'"), X, name)
        else:
            if "point" not in jb:
                raise ConfigError(f"joint '{name}' needs joint.point")
            nb = _nearest(mesh, child, jb["point"])
            na = None if pid is None else _nearest(mesh, pid, jb["point"])
            if kind == "spherical":
                make_spherical(cset, name, X, nb, na)
            else:
                if "transverse_points" not in jb:
                    raise ConfigError(f"joint '{name}': revolute needs joint.transverse_points")
                tp = np.asarray(jb["transverse_points"]).reshape(4, 3)
                trans = [(_nearest(mesh, child, tp[0]), _nearest(mesh, child, tp[1])),
                         (_nearest(mesh, child, tp[2]), _nearest(mesh, child, tp[3]))]
                if pid is None:
                    if "axis" not in jb:
                        raise ConfigError(f"joint '{name}': revolute to ground needs joint.axis")
                    axis = np.asarray(jb["axis"], dtype=float)
                else:
                    if "axis_points" not in jb:
                        raise ConfigError(f"joint '{name}': revolute between bodies needs joint.axis_points")
                    ap = np.asarray(jb["axis_points"]).reshape(2, 3)
                    axis = (_nearest(mesh, pid, ap[0]), _nearest(mesh, pid, ap[1]))
                make_revolute(cset, name, X, nb, trans, axis, node_a=na)
        names.append(name)
    return names


def _build_loads(cfg, mesh, body_ids):
    loads = []
    for k, lb in enumerate(cfg.blocks["load"]):
        name = lb.get("name", f"load{k}")
        b = _body_ref(lb.get("body"), body_ids, f"load '{name}'")
        if "force" not in lb or "select_min" not in lb or "select_max" not in lb:
            raise ConfigError(f"load '{name}' needs load.force, load.select_min and load.select_max")
        nodes = _select(mesh, b, lb["select_min"], lb["select_max"], f"load '{name}'")
        loads.append(Load(nodes, lb["force"], lb.get("ramp_time", 0.0), lb.get("hold_until")))
    return loads


def solver_config(cfg) -> SolverConfig:
    s = dict(cfg.sections.get("solver", {}))
    for k in ("rho", "viscous_tangent"):
        s.pop(k, None)
    return SolverConfig(newton=NewtonConfig(**cfg.sections.get("newton", {})),
                        adamw=AdamWConfig(**cfg.sections.get("adamw", {})), **s)


def contact_params(sec) -> ContactParams:
    mu_s = sec.get("mu_s", 0.5)
    mu_k = sec.get("mu_k", mu_s)
    e = sec.get("e", 0.5)
    if "hertz_E" in sec:
        p = ContactParams.hertz(sec["hertz_E"], sec.get("hertz_nu", 0.3), e, mu_s, mu_k, mu_r=sec.get("mu_r", 0.0))
        if "k_n" in sec or "k_t" in sec:
            raise ConfigError("contact: give either contact.hertz_E or contact.k_n/k_t")
        return p
    return ContactParams(k_n=sec.get("k_n", 1e8), k_t=sec.get("k_t"), mu_s=mu_s, mu_k=mu_k,
                         mu_r=sec.get("mu_r", 0.0), e=e)


def build(cfg: cfgmod.Config) -> Scenario:
    """Validate ``cfg`` and assemble the scenario."""
    base = _base_dir(cfg)
    bodies = cfg.blocks["body"]
    if not bodies:
        raise ConfigError("scenario has no [body] block")
    body_ids, meshes, materials, velocities = {}, [], {}, []
    for i, bb in enumerate(bodies):
        name = bb.get("name", f"body{i}")
        if name in body_ids or name == GROUND:
            raise ConfigError(f"duplicate or reserved body name '{name}'")
        body_ids[name] = i
        mb = _body_mesh(bb, i, base)
        meshes.append(mb)
        materials[i] = _material(bb, mb)
        velocities.append(bb.get("velocity", (0.0, 0.0, 0.0)))
    mesh = meshgen.merge_meshes(*meshes) if len(meshes) > 1 else meshes[0]
    time_sec = cfg.sections.get("time", {})
    if "h" not in time_sec or "n_steps" not in time_sec:
        raise ConfigError("time.h and time.n_steps are required")
    h, n_steps = time_sec["h"], time_sec["n_steps"]
    if not h > 0 or n_steps < 1:
        raise ConfigError("time.h must be positive and time.n_steps at least 1")
    cset = ConstraintSet(mesh.n_dofs, rho=cfg.get("solver", "rho", 1e6))
    joint_names = _build_joints(cfg, mesh, body_ids, cset)
    cset.finalize()
    system = ElasticSystem(mesh, materials, gravity=time_sec.get("gravity", (0.0, 0.0, 0.0)), constraints=cset,
                           viscous_tangent=cfg.get("solver", "viscous_tangent", True))
    loads = _build_loads(cfg, mesh, body_ids)
    solver = solver_config(cfg)
    csec = cfg.sections.get("contact", {})
    contact = None
    if csec.get("enabled", bool(csec)):
        env = []
        if "plane_normal" in csec:
            P, T = meshgen.plane_surface(csec.get("plane_point", (0.0, 0.0, 0.0)), csec["plane_normal"],
                                         csec.get("plane_size", 1.0), body=len(bodies))
            env.append((P, T, len(bodies)))
        soup = TriangleSoup.from_mesh(mesh, env)
        M = system.M.to_scipy()
        infos = {}
        for i in range(len(bodies)):
            nodes = mesh.nodes_of_body(i)
            infos[i] = BodyInfo(nodes, mesh.surface_nodes_of_body(i), system.node_mass[nodes],
                                float(system.node_mass[nodes].sum()), M[nodes][:, nodes])
        model = ContactModel(contact_params(csec), infos, K=csec.get("K", 8), clamp=csec.get("clamp", 50000.0),
                             limit_damping=csec.get("limit_damping", True))
        contact = ContactSetup(soup, BroadPhase(h=h, self_collision=csec.get("self_collision", False)), model)
    asec = cfg.sections.get("async", {})
    async_cfg = AsyncConfig(asec.get("enabled", False), asec.get("n_max", 10))
    sim = Simulation(system, solver, h, loads=loads, contact=contact, async_config=async_cfg,
                     gravity_ramp=time_sec.get("gravity_ramp", 0.0))
    v0 = np.zeros((mesh.n_nodes, 3))
    for i, vel in enumerate(velocities):
        v0[mesh.nodes_of_body(i)] = vel
    state = SystemState(mesh.nodes.reshape(-1).copy(), v0.reshape(-1), 0.0)
    phases = []
    for item in cfg.get("output", "phases", ()):
        try:
            nm, t0, t1 = item.split(":")
            phases.append((nm, float(t0), float(t1)))
        except ValueError:
            raise ConfigError(f"output.phases item '{item}' must be name:t_start:t_end") from None
    return Scenario(cfg.get("scenario", "name", "scenario"), cfg, mesh, system, sim, state, n_steps, body_ids,
                    joint_names, phases, contact)


def load_scenario(name_or_path, overrides: dict | None = None) -> Scenario:
    """Build from a config file or preset name; ``overrides`` maps ``section.key`` to text."""
    cfg = cfgmod.load(cfgmod.resolve(name_or_path))
    for k, v in (overrides or {}).items():
        sec, key = k.split(".", 1)
        cfg.set(sec, key, v)
    return build(cfg)


@dataclass
class RunOutcome:
    result: SimulationResult
    report_path: str | None
    csv_path: str | None
    vtk_files: list
    reactions: dict


def joint_reactions(scn: Scenario, state: SystemState) -> dict:
    cset = scn.system.cset
    if not cset.m:
        return {}
    c = cset.evaluate(state.q, state.t)
    return {name: cset.joint_reaction(name, scn.h, c).tolist() for name in scn.joint_names}


def run_scenario(scn: Scenario, out_dir: str | None = None, n_steps: int | None = None,
                 write_files: bool = True) -> RunOutcome:
    """Advance the scenario, streaming metrics and periodic VTK snapshots."""
    n = n_steps or scn.n_steps
    out_dir = out_dir or scn.config.get("output", "dir", "output")
    vtk_every = scn.config.get("output", "vtk_every", 0)
    csv_path = report_path = None
    vtk_files = []
    writer = None
    if write_files:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, scn.config.get("output", "csv", "metrics.csv"))
        report_path = os.path.join(out_dir, scn.config.get("output", "report", "report.json"))
        writer = MetricsWriter(csv_path)
    stem = os.path.join(out_dir, scn.name)

    def snapshot(k, state):
        path = f"{stem}_{k:06d}.vtk"
        write_state_vtk(path, scn.system, state, f"{scn.name} step {k} t={state.t:.6g}")
        vtk_files.append(path)

    def observer(k, state, rep):
        if writer is not None:
            writer.write(rep)
        if write_files and vtk_every and k % vtk_every == 0:
            snapshot(k, state)

    scn.simulation.observer = observer
    t0 = time.perf_counter()
    try:
        if write_files and vtk_every:
            snapshot(0, scn.initial_state)
        result = scn.simulation.run(n, scn.initial_state)
    finally:
        if writer is not None:
            writer.close()
        if write_files:
            partial = getattr(scn.simulation, "last_result", None)
            if partial is not None:
                _write_report(report_path, scn, partial, time.perf_counter() - t0)
    reactions = joint_reactions(scn, result.state)
    if write_files:
        _write_report(report_path, scn, result, time.perf_counter() - t0, reactions)
    return RunOutcome(result, report_path, csv_path, vtk_files, reactions)


def _write_report(path, scn, result, wall, reactions=None):
    bad = [r.step for r in result.reports if not r.converged]
    doc = {
        "scenario": scn.name,
        "steps": len(result.reports),
        "simulated_time": result.simulated_time,
        "wall_time": wall,
        "rtf": result.rtf if result.simulated_time > 0 else None,
        "phase_rtf": result.phase_rtf(scn.phases) if scn.phases else {},
        "all_converged": not bad,
        "nonconverged_steps": bad,
        "max_acs_age": result.max_acs_age,
        "stopped_early": result.stopped_early,
        "joint_reactions": reactions or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)


def slope_normal(alpha: float) -> tuple:
    """Upward normal of a plane tilted by ``alpha`` about the y axis (it descends towards -x)."""
    return (-math.sin(alpha), 0.0, math.cos(alpha))
