import numpy as np
import pytest
import scipy.linalg as sla

from tlfea import sparse
from tlfea.errors import NotPositiveDefiniteError, SolverStateError, StructuralError, UsageError
from tlfea.validation import random_spd


def test_pattern_builder_symmetric_sorted_unique():
    P = sparse.build_pattern([(0, 2), (2, 0), (1, 1), (0, 0), (2, 2), (1, 1)], 3)
    assert P.indptr.tolist() == [0, 2, 3, 5]
    assert P.indices.tolist() == [0, 2, 1, 0, 2]
    assert np.all(np.diff(P.keys()) > 0)


def test_structure_is_read_only():
    P = sparse.build_pattern([(0, 0), (1, 1)], 2)
    with pytest.raises(ValueError):
        P.indices[0] = 1


def test_lift_to_dof_expands_blocks(beam):
    coef = sparse.build_pattern(sparse.element_pairs(beam.elements), beam.n_nodes)
    dof = sparse.lift_to_dof(coef)
    assert dof.nnz == 9 * coef.nnz
    dense_c = (coef.with_values(np.ones(coef.nnz)).toarray() != 0)
    dense_d = (dof.with_values(np.ones(dof.nnz)).toarray() != 0)
    assert np.array_equal(dense_d, np.kron(dense_c, np.ones((3, 3), bool)))


def test_pattern_rejects_out_of_range():
    with pytest.raises(UsageError):
        sparse.build_pattern([(0, 3)], 3)


@pytest.mark.parametrize("ordering", ["amd", "rcm", "natural"])
@pytest.mark.parametrize("dense_threshold", [0, None])
def test_solve_matches_dense_cholesky(rng, ordering, dense_threshold):
    for n in (1, 7, 60, 150):
        A = random_spd(rng, n, density=min(0.5, 4.0 / n))
        b = rng.standard_normal(n)
        ctx = sparse.factorize(sparse.analyze(A, ordering, dense_threshold), A)
        x = sparse.solve(ctx, b)
        ref = sla.cho_solve(sla.cho_factor(A.toarray()), b)
        assert np.linalg.norm(x - ref) <= 1e-10 * np.linalg.norm(ref)
        assert sparse.residual_ok(A, x, b)


def test_ordering_is_a_permutation(beam):
    coef = sparse.build_pattern(sparse.element_pairs(beam.elements), beam.n_nodes)
    A = sparse.lift_to_dof(coef)
    p = sparse.compute_ordering(A, "amd")
    assert sorted(p.tolist()) == list(range(A.n))
    # DOF triples stay together
    assert np.all(p.reshape(-1, 3) // 3 == (p.reshape(-1, 3) // 3)[:, :1])


def test_refactorize_equals_fresh_factorize(rng):
    A = random_spd(rng, 80, 0.05)
    ctx = sparse.factorize(sparse.analyze(A, dense_threshold=0), A)
    A2 = A.with_values(A.values.copy())
    A2.values[A2.diagonal_positions()] *= 3.0
    sparse.refactorize(ctx, A2)
    fresh = sparse.factorize(sparse.analyze(A2, dense_threshold=0), A2)
    assert np.array_equal(sparse.factor_dense(ctx), sparse.factor_dense(fresh))
    assert ctx.n_factorizations == 1 and ctx.n_refactorizations == 1


def test_lifecycle_errors(rng):
    A = random_spd(rng, 10, 0.3)
    ctx = sparse.analyze(A, dense_threshold=0)
    with pytest.raises(SolverStateError):
        sparse.solve(ctx, np.ones(10))
    with pytest.raises(SolverStateError):
        sparse.refactorize(ctx, A)
    sparse.factorize(ctx, A)
    with pytest.raises(UsageError):
        sparse.solve(ctx, np.ones(9))


def test_structure_mismatch_is_rejected(rng):
    A = random_spd(rng, 10, 0.3)
    B = random_spd(rng, 10, 0.3)
    ctx = sparse.factorize(sparse.analyze(A, dense_threshold=0), A)
    if not (np.array_equal(A.indptr, B.indptr) and np.array_equal(A.indices, B.indices)):
        with pytest.raises(StructuralError):
            sparse.refactorize(ctx, B)


def test_missing_diagonal_is_structural_error():
    P = sparse.build_pattern([(0, 1)], 2)
    with pytest.raises(StructuralError):
        sparse.analyze(P)


@pytest.mark.parametrize("dense_threshold", [0, None])
def test_indefinite_matrix_reports_pivot(dense_threshold):
    P = sparse.build_pattern([(0, 0), (1, 1), (0, 1)], 2)
    A = P.with_values(np.array([1.0, 2.0, 2.0, 1.0]))
    ctx = sparse.analyze(A, dense_threshold=dense_threshold)
    with pytest.raises(NotPositiveDefiniteError):
        sparse.factorize(ctx, A)
    assert not ctx.factored
