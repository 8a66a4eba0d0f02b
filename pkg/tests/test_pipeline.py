import numpy as np
import pytest

from tlfea import config as cfgmod
from tlfea.collision import narrow_phase
from tlfea.errors import UsageError
from tlfea.pipeline import AsyncConfig, Load, Mailbox, rtf
from tlfea.scenarios import build

DROP = """
scenario.name = drop
time.h = 1e-3
time.n_steps = 12
time.gravity = 0 0 -9.81
solver.eps_in = 1e-6
solver.eps_out = 1e-6
solver.rho = 1e10
solver.max_outer = 3
solver.max_inner = 10
contact.k_n = 1e8
contact.e = 0.5
contact.mu_s = 0.3
contact.K = 8
contact.plane_point = 0 0 0
contact.plane_normal = 0 0 1
[body]
body.name = cube
body.shape = box
body.size = 0.1 0.1 0.1
body.divisions = 1 1 1
body.origin = -0.05 -0.05 0.0005
body.E = 1e7
body.nu = 0.3
body.density = 1000
body.velocity = 0 0 -1
"""

PAIR = """
scenario.name = pair
time.h = 1e-3
time.n_steps = 1
contact.k_n = 1e8
contact.mu_s = 0.3
[body]
body.name = lower
body.shape = box
body.size = 0.1 0.1 0.1
body.divisions = 2 2 1
body.E = 1e7
body.nu = 0.3
body.density = 1000
[body]
body.name = upper
body.shape = box
body.size = 0.06 0.06 0.06
body.divisions = 1 1 1
body.origin = 0.02 0.03 0.099
body.E = 1e7
body.nu = 0.3
body.density = 1000
body.velocity = 0.2 -0.1 -0.5
"""


def test_rtf_definition():
    assert rtf(2.0, 0.5) == 4.0
    with pytest.raises(UsageError):
        rtf(1.0, 0.0)


def test_load_schedule():
    ld = Load([0, 1], [0, 0, -10.0], ramp_time=0.1, hold_until=0.5)
    assert ld.factor(0.05) == pytest.approx(0.5)
    assert ld.factor(0.3) == 1.0
    assert ld.factor(0.6) == 0.0
    f = np.zeros(9)
    ld.apply(f, 0.2)
    assert np.allclose(f.reshape(3, 3)[:2, 2], -5.0) and f[6:].sum() == 0.0
    with pytest.raises(UsageError):
        Load([0], [0, 0, 1.0], ramp_time=0.5, hold_until=0.1)
    with pytest.raises(UsageError):
        Load([], [0, 0, 1.0])


def test_async_config_rejects_zero_age():
    with pytest.raises(UsageError):
        AsyncConfig(True, 0)


def test_mailbox_copies_and_stamps():
    box = Mailbox()
    item = np.zeros(3)
    box.put(item, 1)
    item[0] = 5.0
    got, stamp = box.take_newer(0)
    assert stamp == 1 and got[0] == 0.0
    got[1] = 7.0
    again, _ = box.take_newer(0)
    assert again[1] == 0.0
    assert box.take_newer(1) == (None, 1)
    box.close()
    assert box.take_newer(1, block=True) == (None, 1)


def test_observer_can_stop_the_run():
    scn = build(cfgmod.parse(DROP))
    seen = []

    def observer(k, state, rep):
        seen.append(k)
        return k == 3

    scn.simulation.observer = observer
    res = scn.simulation.run(10, scn.initial_state)
    assert seen == [1, 2, 3] and len(res.reports) == 3 and res.stopped_early


def test_drop_makes_contact_and_converges():
    scn = build(cfgmod.parse(DROP))
    res = scn.simulation.run(scn.n_steps, scn.initial_state)
    assert res.all_converged
    assert max(r.n_contacts for r in res.reports) >= 1
    assert res.simulated_time == pytest.approx(12e-3)


def test_async_respects_age_bound_and_blocks():
    cfg = cfgmod.parse(DROP)
    cfg.set("async", "enabled", True)
    cfg.set("async", "n_max", 2)
    scn = build(cfg)
    scn.simulation.worker_delay = 0.02
    res = scn.simulation.run(scn.n_steps, scn.initial_state)
    assert 1 <= res.max_acs_age <= 2
    assert res.blocked_steps


def test_sync_equals_async_with_unit_age():
    finals = []
    for enabled in (False, True):
        cfg = cfgmod.parse(DROP)
        cfg.set("async", "enabled", enabled)
        cfg.set("async", "n_max", 1)
        scn = build(cfg)
        res = scn.simulation.run(scn.n_steps, scn.initial_state)
        finals.append(np.concatenate([res.state.q, res.state.v]))
    assert np.abs(finals[0] - finals[1]).max() <= 1e-12


def test_two_body_contact_forces_cancel():
    scn = build(cfgmod.parse(PAIR))
    c = scn.contact
    st = scn.initial_state
    c.soup.update(st.positions(), st.velocities())
    acs = c.broad.detect(c.soup)
    patches = narrow_phase(c.soup, acs)
    assert patches
    f, rep = c.model.evaluate(patches, st.q, st.v, scn.h)
    F = f.reshape(-1, 3)
    lower = F[scn.body_nodes("lower")].sum(axis=0)
    upper = F[scn.body_nodes("upper")].sum(axis=0)
    scale = np.linalg.norm(upper)
    assert scale > 0
    assert np.allclose(lower, -upper, atol=1e-12 * scale)
    assert upper[2] > 0
    assert rep.max_cone_ratio <= 0.3 * (1 + 1e-12)
