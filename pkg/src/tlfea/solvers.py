"""Augmented-Lagrangian time step with Newton or AdamW inner solvers.

One step solves for the end-of-step velocity ``v`` with ``q = q_n + h v``.
The outer loop updates the multipliers ``lam <- lam + rho c`` until the
constraint residual is below ``eps_out``; the inner loop drives the
gradient of the augmented cost to zero.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import sparse
from .core import SystemState
from .errors import NotPositiveDefiniteError, UsageError

log = logging.getLogger(__name__)


@dataclass
class NewtonConfig:
    """Armijo line-search settings; ``on_failure`` is ``accept_last`` or ``restore``."""

    line_search: bool = True
    c1: float = 1e-4
    beta: float = 0.5
    j_max: int = 10
    on_failure: str = "accept_last"

    def __post_init__(self):
        if not (0 < self.c1 < 1 and 0 < self.beta < 1):
            raise UsageError("Armijo constants c1 and beta must lie in (0, 1)")
        if self.on_failure not in ("accept_last", "restore"):
            raise UsageError("newton.on_failure must be accept_last or restore")


@dataclass
class AdamWConfig:
    """AdamW hyperparameters; ``schedule`` is ``constant`` or ``exponential``.

    ``max_inner`` (when set) replaces the shared inner iteration limit,
    since a first-order method needs far more iterations than Newton.
    ``commit_velocity`` makes every outer pass adopt the current velocity
    as the inertia reference ``v_n``; this follows the published
    algorithm but changes the minimised cost whenever more than one outer
    pass runs, so tight comparisons against Newton switch it off.
    """

    alpha: float = 1e-3
    schedule: str = "constant"
    decay: float = 1.0
    alpha_min: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    check_interval: int = 10
    commit_velocity: bool = True
    max_inner: int | None = None

    def __post_init__(self):
        if self.schedule not in ("constant", "exponential"):
            raise UsageError("adamw.schedule must be constant or exponential")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise UsageError("AdamW betas must lie in [0, 1)")
        if self.check_interval < 1:
            raise UsageError("check_interval must be at least 1")
        if self.max_inner is not None and self.max_inner < 1:
            raise UsageError("adamw.max_inner must be at least 1")

    def step_size(self, l: int) -> float:
        if self.schedule == "constant":
            return self.alpha
        return max(self.alpha_min, self.alpha * self.decay ** (l - 1))


@dataclass
class SolverConfig:
    """Tolerances and iteration limits of one time step.

    ``eps_in`` is the absolute inner tolerance, ``eps_rel`` the relative one
    (0 disables it), ``eps_out`` the constraint tolerance.
    """

    method: str = "newton"
    eps_in: float = 1e-6
    eps_rel: float = 0.0
    eps_out: float = 1e-6
    max_outer: int = 8
    max_inner: int = 10
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    adamw: AdamWConfig = field(default_factory=AdamWConfig)
    ordering: str = "amd"
    dense_threshold: int = sparse.DENSE_THRESHOLD

    def __post_init__(self):
        if self.method not in ("newton", "adamw"):
            raise UsageError(f"unknown solver '{self.method}' (newton or adamw)")
        if not (self.eps_in > 0 and self.eps_out > 0 and self.eps_rel >= 0):
            raise UsageError("tolerances must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise UsageError("iteration limits must be at least 1")


@dataclass
class StepReport:
    """Diagnostics of one time step."""

    step: int = 0
    t: float = 0.0
    outer_iters: int = 0
    inner_iters_total: int = 0
    grad_norm: float = 0.0
    constraint_norm: float = 0.0
    backtracks: int = 0
    line_search_failures: int = 0
    factorizations: int = 0
    refactorizations: int = 0
    wall_time: float = 0.0
    inner_converged: bool = False
    converged: bool = False
    n_contacts: int = 0
    grad_history: list = field(default_factory=list)

    @property
    def nonconvergence(self) -> bool:
        return not self.converged

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("grad_history")
        return d


@dataclass
class StepProblem:
    """Data fixed during one step."""

    q_n: np.ndarray
    v_n: np.ndarray
    h: float
    t: float  # end-of-step time
    f_ext: np.ndarray


def _norm(x) -> float:
    return float(np.linalg.norm(x))


# ------------------------------------------------------------------ Newton

class NewtonSolver:
    """Newton inner loop owning one solve context for the whole simulation."""

    def __init__(self, config: SolverConfig):
        self.config = config
        self.ctx: sparse.SpdSolveContext | None = None

    def _factor(self, H, report: StepReport, h: float):
        cfg = self.config
        try:
            if self.ctx is None:
                self.ctx = sparse.analyze(H, cfg.ordering, cfg.dense_threshold)
            if self.ctx.n_factorizations == 0:
                sparse.factorize(self.ctx, H)
                report.factorizations += 1
            else:
                sparse.refactorize(self.ctx, H)
                report.refactorizations += 1
        except NotPositiveDefiniteError as err:
            raise NotPositiveDefiniteError(
                f"{err}. The Hessian M/h + h K_t is positive definite when "
                f"h < sqrt(lambda_min(M) / |lambda_min(K_t)|); current h = {h:g}", row=err.row) from err

    def solve(self, system, prob: StepProblem, v, report: StepReport):
        cfg, nc = self.config, self.config.newton
        g, c = system.evaluate(v, prob.q_n, prob.v_n, prob.h, prob.t, prob.f_ext)
        g0 = _norm(g)
        tol = max(cfg.eps_in, cfg.eps_rel * g0)
        gn = g0
        report.grad_history.append(gn)
        converged = gn <= tol
        it = 0
        while not converged and it < cfg.max_inner:
            H = system.hessian(v, prob.q_n, prob.h)
            self._factor(H, report, prob.h)
            dv = sparse.solve(self.ctx, -g)
            it += 1
            if nc.line_search and gn > 0.0:
                phi0 = 0.5 * gn * gn
                alpha, accepted = 1.0, False
                for j in range(nc.j_max + 1):
                    vt = v + alpha * dv
                    gt, ct = system.evaluate(vt, prob.q_n, prob.v_n, prob.h, prob.t, prob.f_ext)
                    phit = 0.5 * float(gt @ gt)
                    if phit <= (1.0 - 2.0 * nc.c1 * alpha) * phi0:
                        accepted = True
                        break
                    if j < nc.j_max:
                        alpha *= nc.beta
                        report.backtracks += 1
                if not accepted:
                    report.line_search_failures += 1
                    if nc.on_failure == "restore":
                        g, c = system.evaluate(v, prob.q_n, prob.v_n, prob.h, prob.t, prob.f_ext)
                        break
                v, g, c = vt, gt, ct
            else:
                v = v + dv
                g, c = system.evaluate(v, prob.q_n, prob.v_n, prob.h, prob.t, prob.f_ext)
            gn = _norm(g)
            report.grad_history.append(gn)
            converged = gn <= tol
        report.inner_iters_total += it
        report.grad_norm = gn
        return v, converged


# ------------------------------------------------------------------ AdamW

class AdamWSolver:
    """First-order inner loop with bias-corrected moments, reset every outer pass."""

    def __init__(self, config: SolverConfig):
        self.config = config

    def solve(self, system, prob: StepProblem, v, report: StepReport):
        cfg, ac = self.config, self.config.adamw
        g, c = system.evaluate(v, prob.q_n, prob.v_n, prob.h, prob.t, prob.f_ext)
        g0 = _norm(g)
        report.grad_history.append(g0)
        m = np.zeros_like(v)
        s = np.zeros_like(v)
        converged = g0 <= cfg.eps_in * (1.0 + _norm(v))
        l_max = ac.max_inner or cfg.max_inner
        l = 0
        gn = g0
        while not converged and l < l_max:
            l += 1
            m = ac.beta1 * m + (1.0 - ac.beta1) * g
            s = ac.beta2 * s + (1.0 - ac.beta2) * g * g
            mh = m / (1.0 - ac.beta1 ** l)
            sh = s / (1.0 - ac.beta2 ** l)
            a = ac.step_size(l)
            v = (1.0 - a * ac.weight_decay) * v - a * mh / (np.sqrt(sh) + ac.eps)
            g, c = system.evaluate(v, prob.q_n, prob.v_n, prob.h, prob.t, prob.f_ext)
            if l % ac.check_interval == 0 or l == l_max:
                gn = _norm(g)
                report.grad_history.append(gn)
                converged = gn <= cfg.eps_in * (1.0 + _norm(v)) or (cfg.eps_rel > 0 and gn <= cfg.eps_rel * g0)
        report.inner_iters_total += l
        report.grad_norm = _norm(g)
        return v, converged


def make_inner_solver(config: SolverConfig):
    return NewtonSolver(config) if config.method == "newton" else AdamWSolver(config)


def alm_step(state: SystemState, system, config: SolverConfig, h: float, f_ext=None,
             inner=None, step: int = 0, v_guess=None) -> tuple[SystemState, StepReport]:
    """Advance one backward-Euler step with the augmented Lagrangian outer loop.

    ``inner`` keeps solver state (the factorization) between calls; pass the
    same object every step.
    """
    t0 = time.perf_counter()
    inner = inner or make_inner_solver(config)
    cset = system.cset
    f_ext = np.zeros(system.n_dofs) if f_ext is None else np.asarray(f_ext, dtype=float)
    prob = StepProblem(state.q.copy(), state.v.copy(), h, state.t + h, f_ext)
    v = prob.v_n.copy() if v_guess is None else np.array(v_guess, dtype=float)
    rep = StepReport(step=step, t=prob.t)
    cset.in_step = True
    cnorm = 0.0
    try:
        for k in range(config.max_outer):
            rep.outer_iters = k + 1
            v, inner_ok = inner.solve(system, prob, v, rep)
            rep.inner_converged = inner_ok
            if isinstance(inner, AdamWSolver) and config.adamw.commit_velocity:
                prob.v_n = v.copy()
            q = prob.q_n + h * v
            if cset.m == 0:
                cnorm = 0.0
                rep.converged = inner_ok
                break
            c = cset.evaluate(q, prob.t)
            cnorm = _norm(c)
            if inner_ok or isinstance(inner, AdamWSolver):
                cset.multiplier_update(c)
            if inner_ok and cnorm <= config.eps_out:
                rep.converged = True
                break
    finally:
        cset.in_step = False
    rep.constraint_norm = cnorm
    rep.wall_time = time.perf_counter() - t0
    if not rep.converged:
        log.debug("step %d not converged: |g|=%.3e |c|=%.3e", step, rep.grad_norm, cnorm)
    return SystemState(prob.q_n + h * v, v, prob.t), rep
