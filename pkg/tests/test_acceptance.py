"""Acceptance suite: one test per numbered criterion.

Each test runs the matching :mod:`tlfea.validation` check, asserts that
the tolerances and time budgets used there equal the ones pinned below,
and records a one-line verdict.  The verdicts are printed at the end of
the session (see ``conftest.py``) and also immediately on stdout.
"""
import pytest

from tlfea import validation as val

RESULTS: list[str] = []

# criterion -> (check functions, wall-clock budget in s, {check-name fragment: tolerance});
# the first matching fragment wins
CRITERIA = {
    1: ((val.check_gradient,), 5.0, {"gradient error": 1e-5}),
    2: ((val.check_hessian,), 5.0, {"Frobenius": 1e-4}),
    3: ((val.check_materials,), 10.0, {"pk1 = dW/dF": 1e-5, "tangent = dP/dF": 1e-4}),
    4: ((val.check_sparse,), 10.0, {"sparse vs dense": 1e-10, "refactorize": 1e-12}),
    5: ((val.check_fixed_sparsity,), 30.0, {"byte strings": 1, "full factorizations": 1}),
    6: ((val.check_solver_agreement,), 120.0, {"tip displacement": 1e-4}),
    7: ((val.check_brick_slope,), 300.0, {"slope 1": 1e-3, "slope 2": 1e-3, "along-slope acceleration": 0.05,
                                          "brick mesh size": 500}),
    8: ((val.check_oblique_impact,), 900.0, {"deg: e_t": 0.10, "|omega|": 0.15, "sphere mesh size": 1500}),
    9: ((val.check_joints,), 600.0, {"residual": 1e-8, "spherical": 0.01, "revolute": 0.05, "elements per link": 300}),
    10: ((val.check_collision,), 120.0, {"false negatives": 0, "union-find": 0, "sync vs async": 1e-12}),
    11: ((val.check_invariants,), 60.0, {"Coulomb cone": 0, "sum exactly": 0, "viscous power": 0}),
}


def _pinned(check, pins):
    for fragment, tol in pins.items():
        if fragment in check.name:
            return tol
    return None


def _record(number, results):
    ok = all(r.passed for r in results)
    secs = sum(r.seconds for r in results)
    summary = "; ".join(r.summary() for r in results)
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({secs:.1f} s) {summary}"
    RESULTS.append(line)
    print(line)
    for r in results:
        print("\n".join(r.lines()))
    return ok


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    funcs, budget, pins = CRITERIA[number]
    results = [f() for f in funcs]
    for r in results:
        assert r.time_limit == budget
        for c in r.checks:
            tol = _pinned(c, pins)
            if tol is not None and c.limit is not None:
                assert c.limit == pytest.approx(tol, rel=1e-12, abs=0), c.name
    ok = _record(number, results)
    failed = [c.line() for r in results for c in r.checks if not c.passed]
    late = [f"{r.name}: {r.seconds:.1f} s > {r.time_limit:.0f} s" for r in results if not r.in_time]
    assert ok, "\n".join(failed + late)


def test_slope4_acceleration_tolerance_is_five_percent():
    """Criterion 7's acceleration bound is a relative 5% around 0.526 m/s^2."""
    assert val.SLOPE4_REFERENCE == 0.526
    assert val.SLOPE4_REL_TOL == 0.05
