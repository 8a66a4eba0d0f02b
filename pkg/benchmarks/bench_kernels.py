"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--res 0|2|4] [--repeat N]

Each kernel runs on the same inputs taken from a clamped cantilever
(stress, internal force, Hessian values, sparse Cholesky of that Hessian)
and a random triangle batch (exact triangle distance).  The best of
``--repeat`` runs is reported together with the speedup.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from tlfea import _pykernels, kernels, meshgen, sparse
from tlfea.assembly import ElasticSystem
from tlfea.constraints import ConstraintSet, add_clamp
from tlfea.materials import MaterialParams

try:
    from tlfea import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None

NAMES = ("stress_batch", "internal_force", "hessian_tangent", "chol_symbolic", "chol_numeric", "chol_solve",
         "tri_tri_distance")


def use(impl) -> None:
    for name in NAMES:
        setattr(kernels, name, getattr(impl, name))


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(res: int, rng):
    beam = meshgen.cantilever_mesh(res)
    cset = ConstraintSet(beam.n_dofs, rho=1e12)
    add_clamp(cset, np.flatnonzero(beam.nodes[:, 0] == 0.0), beam.nodes)
    cset.finalize()
    v = 1e-2 * rng.standard_normal(beam.n_dofs)
    q_n = beam.nodes.reshape(-1).copy()
    f_ext = np.zeros(beam.n_dofs)
    T1 = rng.standard_normal((20000, 3, 3))
    T2 = rng.standard_normal((20000, 3, 3)) + 1.0
    state = {}

    def setup():
        system = ElasticSystem(beam, {0: MaterialParams.svk(7e8, 0.33, 2700.0)}, constraints=cset)
        system.evaluate(v, q_n, v, 1e-3, 0.0, f_ext)
        H = system.hessian(v, q_n, 1e-3)
        state.update(system=system, H=H, ctx=sparse.analyze(H, "amd"))

    def force():
        state["system"].evaluate(v, q_n, v, 1e-3, 0.0, f_ext)

    def hessian():
        state["system"].hessian(v, q_n, 1e-3)

    def cholesky():
        ctx = sparse.analyze(state["H"], "amd")
        sparse.factorize(ctx, state["H"])
        sparse.solve(ctx, np.ones(beam.n_dofs))

    def distance():
        kernels.tri_tri_distance(T1, T2)

    return beam, setup, [("gradient (stress + force)", force), ("Hessian values", hessian),
                         ("analyze + factor + solve", cholesky), ("triangle distance x20000", distance)]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--res", type=int, choices=(0, 2, 4), default=2)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels are not built; only the numpy fallback is available", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    beam, setup, jobs = workloads(args.res, rng)
    print(f"cantilever RES{args.res}: {beam.n_nodes} nodes, {beam.n_elements} elements, {beam.n_dofs} DOFs")
    timings = {}
    for impl in (_pykernels, _ckernels):
        use(impl)
        setup()
        for name, fn in jobs:
            timings.setdefault(name, {})[impl.IMPLEMENTATION] = best_of(fn, args.repeat)
    print(f"{'kernel':28s} {'numpy [ms]':>12s} {'compiled [ms]':>14s} {'speedup':>8s}")
    for name, t in timings.items():
        py, c = t["python"], t["compiled"]
        print(f"{name:28s} {1e3 * py:12.3f} {1e3 * c:14.3f} {py / c:8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
