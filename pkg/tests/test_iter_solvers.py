import numpy as np
import pytest

from app.core.exceptions import (
    NonConvergenceError,
    OrderCapExceededError,
    SingularMatrixError,
    ZeroDiagonalError,
)
from app.services.iter_solvers import (
    bicg,
    dense_lu_inverse,
    dense_trace,
    gauss_seidel,
    precheck,
    spectral_radius_estimate,
)
from app.services.sparse_matrix import build
from app.services.trace_query import TraceQuery


def two_by_two(a, b):
    return build(2, [(0, 0, 1.0), (0, 1, a), (1, 0, b), (1, 1, 1.0)])


def dense_iteration_matrices(c):
    lower, diag, upper = c.split()
    d = np.diag(diag)
    t = np.linalg.solve(d + lower.toarray(), upper.toarray())
    s = lower.toarray() @ np.linalg.inv(d + upper.toarray())
    return t, s


def radius(m):
    return float(np.max(np.abs(np.linalg.eigvals(m))))


class TestGaussSeidel:
    def test_identity_in_one_sweep(self):
        c = build(3, [(i, i, 1.0) for i in range(3)])
        report = gauss_seidel(c, np.array([1.0, 2.0, 3.0]))
        assert report.iterations == 1
        assert report.converged
        np.testing.assert_array_equal(report.solution, [1.0, 2.0, 3.0])

    def test_solves_dominant_system(self, make_dominant):
        c = make_dominant(30, seed=1, complex_values=True)
        b = np.arange(30, dtype=np.float64)
        report = gauss_seidel(c, b, tol=1e-12)
        np.testing.assert_allclose(c.matvec(report.solution), b, atol=1e-9)

    def test_zero_rhs(self, make_dominant):
        report = gauss_seidel(make_dominant(5, seed=2), np.zeros(5))
        assert report.iterations == 0
        assert not np.any(report.solution)

    def test_divergent_system(self, divergent4):
        with pytest.raises(NonConvergenceError) as info:
            gauss_seidel(divergent4, np.ones(4), max_iter=50)
        assert info.value.exit_code == 4
        assert not info.value.report.converged

    def test_zero_diagonal(self):
        c = build(2, [(0, 0, 1.0), (1, 0, 1.0)])
        with pytest.raises(ZeroDiagonalError):
            gauss_seidel(c, np.ones(2))


class TestBicg:
    def test_complex_non_hermitian(self, make_dominant):
        c = make_dominant(40, seed=3, complex_values=True)
        b = np.linspace(-1.0, 1.0, 40)
        report = bicg(c, b, tol=1e-12)
        assert report.converged
        np.testing.assert_allclose(c.matvec(report.solution), b, atol=1e-9)

    def test_hermitian_reduces_to_cg(self, make_dominant):
        c = make_dominant(25, seed=4, complex_values=True, hermitian=True)
        b = np.ones(25)
        report = bicg(c, b, tol=1e-12)
        # CG terminates in at most n steps in exact arithmetic
        assert report.iterations <= 25
        np.testing.assert_allclose(c.matvec(report.solution), b, atol=1e-9)

    def test_zero_rhs(self, diag24):
        report = bicg(diag24, np.zeros(2))
        assert report.iterations == 0
        assert report.converged

    def test_iteration_cap(self, make_dominant):
        c = make_dominant(30, seed=5)
        with pytest.raises(NonConvergenceError):
            bicg(c, np.ones(30), tol=1e-14, max_iter=1)


class TestDenseOracle:
    def test_inverse(self, make_dominant):
        c = make_dominant(15, seed=6, complex_values=True)
        np.testing.assert_allclose(dense_lu_inverse(c) @ c.to_dense(), np.eye(15), atol=1e-12)

    def test_order_cap(self, make_dominant):
        with pytest.raises(OrderCapExceededError) as info:
            dense_lu_inverse(make_dominant(10, seed=7), cap=9)
        assert info.value.exit_code == 6

    def test_singular(self):
        c = build(2, [(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 4.0)])
        with pytest.raises(SingularMatrixError):
            dense_lu_inverse(c)

    def test_trace(self, diag24):
        assert dense_trace(diag24) == pytest.approx(0.75)
        assert dense_trace(diag24, TraceQuery.diagonal([1])) == pytest.approx(0.25)

    def test_complex_trace(self):
        c = build(1, [(0, 0, 2.0j)])
        assert dense_trace(c) == pytest.approx(-0.5j)


class TestSpectralRadius:
    def test_two_by_two(self):
        # T = [[0, a], [0, -ab]] and S = [[0, 0], [b, -ab]], so both radii are |ab|
        c = two_by_two(0.5, 0.6)
        assert spectral_radius_estimate(c, "T").value == pytest.approx(0.3, rel=1e-5)
        assert spectral_radius_estimate(c, "S").value == pytest.approx(0.3, rel=1e-5)

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_matches_dense_eigenvalues(self, make_dominant, seed):
        c = make_dominant(10, seed=seed, density=0.5, complex_values=True, margin=0.1)
        t, s = dense_iteration_matrices(c)
        assert spectral_radius_estimate(c, "T").value == pytest.approx(radius(t), rel=0.05)
        assert spectral_radius_estimate(c, "S").value == pytest.approx(radius(s), rel=0.05)

    def test_divergent_matrix_has_radius_above_one(self, divergent4):
        t, s = dense_iteration_matrices(divergent4)
        assert radius(t) > 1.0
        assert radius(s) > 1.0
        assert spectral_radius_estimate(divergent4, "T").value > 1.0

    def test_diagonal_is_zero(self, diag24):
        estimate = spectral_radius_estimate(diag24)
        assert estimate.value == 0.0
        assert estimate.converged

    def test_unknown_operator(self, diag24):
        with pytest.raises(ValueError):
            spectral_radius_estimate(diag24, "Q")

    def test_precheck(self, divergent4, make_dominant):
        assert not precheck(divergent4).passes
        result = precheck(make_dominant(20, seed=8))
        assert result.passes
        assert set(result.to_dict()) == {"spectral_radius_t", "t_converged", "spectral_radius_s",
                                         "s_converged", "passes"}
