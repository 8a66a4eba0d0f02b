"""Per-step orchestration: detection, contact forces and the implicit solve.

In synchronous mode detection runs inline at the start of every step.
In asynchronous mode a kinematics worker thread runs the broad phase on
state snapshots ("work orders") while the stepping loop consumes the
freshest active contact set, blocking only when the set it holds is
``n_max`` steps old.  Both sides exchange copies through a pair of
single-slot mailboxes and never touch each other's working storage.
"""
from __future__ import annotations

import copy
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .collision import Acs, BroadPhase, TriangleSoup, narrow_phase
from .contact import ContactModel
from .core import SystemState
from .errors import TlfeaError, UsageError
from .solvers import SolverConfig, StepReport, alm_step, make_inner_solver

log = logging.getLogger(__name__)


class DetectionWorkerError(TlfeaError):
    """The kinematics worker failed; the run stopped with partial outputs."""


@dataclass
class AsyncConfig:
    """Asynchronous detection switch and the maximum ACS age in steps."""

    enabled: bool = False
    n_max: int = 10

    def __post_init__(self):
        if int(self.n_max) < 1:
            raise UsageError("n_max must be at least 1")
        self.n_max = int(self.n_max)


def rtf(wall_seconds: float, simulated_seconds: float) -> float:
    """Real-time factor: wall-clock time over simulated time."""
    if not simulated_seconds > 0:
        raise UsageError("simulated time must be positive")
    return wall_seconds / simulated_seconds


class Mailbox:
    """Single-slot, overwrite-on-put buffer with copy-in/copy-out semantics."""

    def __init__(self):
        self._cond = threading.Condition()
        self._item = None
        self._stamp = -1
        self._closed = False

    def put(self, item, stamp: int) -> None:
        item = copy.deepcopy(item)
        with self._cond:
            self._item, self._stamp = item, stamp
            self._cond.notify_all()

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        return self._closed

    def take_newer(self, stamp: int, block: bool = False, poll=None):
        """Item with a stamp above ``stamp`` (or ``None``); optionally wait for one."""
        with self._cond:
            while self._stamp <= stamp:
                if not block or self._closed:
                    return None, self._stamp
                self._cond.wait(timeout=0.05)
                if poll is not None:
                    poll()
            return copy.deepcopy(self._item), self._stamp


@dataclass
class ContactSetup:
    """Collision and contact pieces of a scene."""

    soup: TriangleSoup
    broad: BroadPhase
    model: ContactModel


@dataclass
class Load:
    """Total force spread uniformly over ``nodes``.

    The magnitude ramps linearly from 0 over ``[0, ramp_time]``, holds
    until ``hold_until`` (``None`` for ever) and is zero afterwards.
    """

    nodes: np.ndarray
    force: np.ndarray
    ramp_time: float = 0.0
    hold_until: float | None = None

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.int64).reshape(-1)
        self.force = np.asarray(self.force, dtype=float).reshape(3)
        if len(self.nodes) == 0:
            raise UsageError("load needs at least one node")
        if self.ramp_time < 0 or (self.hold_until is not None and self.hold_until < self.ramp_time):
            raise UsageError("load schedule must be monotone in time")

    def factor(self, t: float) -> float:
        if self.hold_until is not None and t > self.hold_until:
            return 0.0
        if self.ramp_time > 0 and t < self.ramp_time:
            return t / self.ramp_time
        return 1.0

    def apply(self, f: np.ndarray, t: float) -> None:
        s = self.factor(t)
        if s != 0.0:
            F = f.reshape(-1, 3)
            np.add.at(F, self.nodes, s * self.force / len(self.nodes))


@dataclass
class SimulationResult:
    state: SystemState
    reports: list
    wall_time: float
    simulated_time: float
    max_acs_age: int = 0
    blocked_steps: list = field(default_factory=list)
    states: list = field(default_factory=list)
    stopped_early: bool = False

    @property
    def rtf(self) -> float:
        return rtf(self.wall_time, self.simulated_time) if self.simulated_time > 0 else float("nan")

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.reports)

    def phase_rtf(self, phases) -> dict:
        """RTF per ``(name, t_start, t_end)`` phase from per-step wall times."""
        out = {}
        for name, t0, t1 in phases:
            sel = [r for r in self.reports if t0 < r.t <= t1 + 1e-12]
            if sel:
                sim = len(sel) * (sel[-1].t - sel[0].t) / max(len(sel) - 1, 1) if len(sel) > 1 else t1 - t0
                out[name] = rtf(sum(r.wall_time for r in sel), max(sim, 1e-300))
        return out


class _DetectionWorker(threading.Thread):
    """Kinematics role: snapshots in, labelled active contact sets out."""

    def __init__(self, soup: TriangleSoup, broad: BroadPhase, orders: Mailbox, results: Mailbox,
                 delay: float = 0.0):
        super().__init__(name="tlfea-kinematics", daemon=True)
        self.soup = copy.deepcopy(soup)
        self.broad = copy.deepcopy(broad)
        self.orders = orders
        self.results = results
        self.delay = delay
        self.error: BaseException | None = None
        self.stop = threading.Event()

    def run(self):
        stamp = -1
        try:
            while not self.stop.is_set():
                wo, s = self.orders.take_newer(stamp, block=True)
                if wo is None:
                    if self.orders.closed:
                        return
                    continue
                stamp = s
                q, v = wo
                self.soup.update(q.reshape(-1, 3), v.reshape(-1, 3))
                if self.delay:
                    time.sleep(self.delay)
                acs = self.broad.detect(self.soup, timestamp=stamp)
                self.results.put(acs, stamp)
        except BaseException as err:  # reported to the stepping loop
            self.error = err
            self.results.close()


class Simulation:
    """Stepping loop over an :class:`~tlfea.assembly.ElasticSystem`.

    ``observer(step, state, report)`` is called after every step; returning
    ``True`` ends the run early (``SimulationResult.stopped_early``).
    """

    def __init__(self, system, solver: SolverConfig, h: float, loads=(), contact: ContactSetup | None = None,
                 async_config: AsyncConfig | None = None, observer: Callable | None = None,
                 worker_delay: float = 0.0, keep_states: bool = False, gravity_ramp: float = 0.0):
        if not h > 0:
            raise UsageError("time step must be positive")
        self.system = system
        self.solver = solver
        self.h = float(h)
        self.loads = list(loads)
        self.contact = contact
        self.async_config = async_config or AsyncConfig()
        self.observer = observer
        self.worker_delay = worker_delay
        self.keep_states = keep_states
        if gravity_ramp < 0:
            raise UsageError("gravity ramp time must be non-negative")
        self.gravity_ramp = float(gravity_ramp)
        self.inner = make_inner_solver(solver)
        if contact is not None:
            contact.broad.n_max = self.async_config.n_max

    def external_load(self, t: float) -> np.ndarray:
        """Applied loads at time ``t``.

        While ``t < gravity_ramp`` the body force is scaled by
        ``t / gravity_ramp`` by cancelling the remaining fraction here.
        """
        f = np.zeros(self.system.n_dofs)
        for ld in self.loads:
            ld.apply(f, t)
        if self.gravity_ramp > 0 and t < self.gravity_ramp:
            f -= (1.0 - t / self.gravity_ramp) * self.system.f_ff
        return f

    def _contact_load(self, acs: Acs, state: SystemState, step: int):
        c = self.contact
        c.soup.update(state.positions(), state.velocities())
        patches = narrow_phase(c.soup, acs)
        f, rep = c.model.evaluate(patches, state.q, state.v, self.h, step)
        return f, rep

    def run(self, n_steps: int, state: SystemState | None = None) -> SimulationResult:
        if n_steps < 1:
            raise UsageError("n_steps must be at least 1")
        state = state.copy() if state is not None else SystemState(
            self.system.mesh.nodes.reshape(-1).copy(), np.zeros(self.system.n_dofs), 0.0)
        use_async = self.contact is not None and self.async_config.enabled
        n_max = self.async_config.n_max
        reports: list[StepReport] = []
        states = [state.copy()] if self.keep_states else []
        max_age, blocked = 0, []
        stopped = False
        worker = orders = results = None
        if use_async:
            orders, results = Mailbox(), Mailbox()
            worker = _DetectionWorker(self.contact.soup, self.contact.broad, orders, results, self.worker_delay)
            worker.start()
            orders.put((state.q, state.v), 0)
        acs, acs_stamp = None, -1
        t_start = time.perf_counter()
        try:
            for k in range(n_steps):
                t0 = time.perf_counter()
                f_ext = self.external_load(state.t + self.h)
                n_contacts = 0
                if self.contact is not None:
                    if use_async:
                        new, s = results.take_newer(acs_stamp)
                        if new is not None:
                            acs, acs_stamp = new, s
                        if acs is None or k + 1 - acs_stamp > n_max:
                            blocked.append(k)

                            def _check():
                                if worker.error is not None:
                                    raise DetectionWorkerError(f"detection worker failed: {worker.error!r}")

                            new, s = results.take_newer(max(acs_stamp, k - n_max), block=True, poll=_check)
                            _check()
                            if new is None:
                                raise DetectionWorkerError("detection worker stopped")
                            acs, acs_stamp = new, s
                        max_age = max(max_age, k + 1 - acs_stamp)
                    else:
                        self.contact.soup.update(state.positions(), state.velocities())
                        acs, acs_stamp = self.contact.broad.detect(self.contact.soup, timestamp=k), k
                        max_age = max(max_age, 1)
                    fc, crep = self._contact_load(acs, state, k)
                    f_ext = f_ext + fc
                    n_contacts = crep.n_contacts
                state, rep = alm_step(state, self.system, self.solver, self.h, f_ext, self.inner, step=k + 1)
                rep.n_contacts = n_contacts
                rep.wall_time = time.perf_counter() - t0
                reports.append(rep)
                if use_async:
                    orders.put((state.q, state.v), k + 1)
                if self.keep_states:
                    states.append(state.copy())
                if self.observer is not None and self.observer(k + 1, state, rep) is True:
                    stopped = True
                    break
        except DetectionWorkerError:
            stopped = True
            raise
        finally:
            if worker is not None:
                worker.stop.set()
                orders.close()
                worker.join(timeout=5.0)
            self.last_result = SimulationResult(state, reports, time.perf_counter() - t_start,
                                                self.h * len(reports), max_age, blocked, states, stopped)
        if max_age > n_max:
            raise AssertionError(f"ACS age {max_age} exceeded n_max={n_max}")
        return self.last_result
