"""The compiled kernels agree with the numpy reference implementation."""
import numpy as np
import pytest

from tlfea import _pykernels, kernels, sparse
from tlfea.assembly import ElasticSystem
from tlfea.constraints import ConstraintSet, add_clamp
from tlfea.materials import MaterialParams
from tlfea.validation import random_spd

ckernels = pytest.importorskip("tlfea._ckernels")

NAMES = ("stress_batch", "internal_force", "hessian_tangent", "chol_symbolic", "chol_numeric", "chol_solve",
         "tri_tri_distance")


def _use(monkeypatch, impl):
    for name in NAMES:
        monkeypatch.setattr(kernels, name, getattr(impl, name))


def test_dispatch_reports_implementation():
    assert kernels.impl.IMPLEMENTATION in ("compiled", "python")
    assert kernels.COMPILED == (kernels.impl is ckernels)
    assert ckernels.IMPLEMENTATION == "compiled" and _pykernels.IMPLEMENTATION == "python"


def _system(beam, material):
    cset = ConstraintSet(beam.n_dofs, rho=1e6)
    add_clamp(cset, np.flatnonzero(beam.nodes[:, 0] == 0.0), beam.nodes)
    cset.finalize()
    return ElasticSystem(beam, {0: material}, constraints=cset)


@pytest.mark.parametrize("material", [
    MaterialParams.svk(7e8, 0.33, 2700.0, eta_damp=10.0, lambda_damp=5.0),
    MaterialParams.mooney_rivlin(7.89e7, 5.26e7, kappa=1.03e9, density=2700.0, eta_damp=3.0),
])
def test_force_and_hessian_match(monkeypatch, beam, rng, material):
    v = 0.1 * rng.standard_normal(beam.n_dofs)
    q_n = beam.nodes.reshape(-1) + 1e-3 * rng.standard_normal(beam.n_dofs)
    f_ext = rng.standard_normal(beam.n_dofs)
    out = {}
    for impl in (_pykernels, ckernels):
        _use(monkeypatch, impl)
        system = _system(beam, material)
        g, _ = system.evaluate(v, q_n, v, 1e-3, 0.0, f_ext)
        H = system.hessian(v, q_n, 1e-3)
        out[impl.IMPLEMENTATION] = (g, H.values.copy(), system.internal_force(q_n, v))
    for a, b in zip(out["python"], out["compiled"]):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(a).max())


def test_cholesky_matches(monkeypatch, rng):
    for _ in range(10):
        n = int(rng.integers(5, 80))
        A = random_spd(rng, n, 0.1)
        b = rng.standard_normal(n)
        xs = []
        for impl in (_pykernels, ckernels):
            _use(monkeypatch, impl)
            ctx = sparse.analyze(A, "amd", dense_threshold=0)
            sparse.factorize(ctx, A)
            xs.append(sparse.solve(ctx, b))
        assert np.allclose(xs[0], xs[1], rtol=1e-12, atol=1e-12 * np.abs(xs[0]).max())


def test_triangle_distance_matches(rng):
    T1 = rng.standard_normal((500, 3, 3))
    T2 = rng.standard_normal((500, 3, 3)) + rng.uniform(0, 3, (500, 1, 3))
    d_py = _pykernels.tri_tri_distance(T1, T2)
    d_c = ckernels.tri_tri_distance(T1, T2)
    assert np.allclose(d_py, d_c, rtol=1e-10, atol=1e-12)
    assert np.array_equal(d_py == 0.0, d_c == 0.0)


def test_thread_count_from_environment(monkeypatch):
    monkeypatch.setenv("TLFEA_THREADS", "3")
    assert kernels.thread_count() == 3
    monkeypatch.setenv("TLFEA_THREADS", "bogus")
    assert kernels.thread_count() >= 1
