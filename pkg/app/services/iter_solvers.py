"""
Deterministic solvers: Gauss-Seidel, BiCG, a dense LU oracle and power
iteration estimates of the spectral radii that gate CC convergence.
"""
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
import scipy.linalg
from loguru import logger

from app.core.exceptions import (
    BreakdownError,
    NonConvergenceError,
    OrderCapExceededError,
    SingularMatrixError,
)
from app.services.sparse_matrix import SparseMatrix, SweepMode
from app.services.trace_query import TraceQuery

DEFAULT_ORDER_CAP = 4096
_TINY = np.finfo(np.float64).tiny


@dataclass
class SolveReport:
    """Outcome of an iterative solve"""
    solution: np.ndarray
    iterations: int
    change_norm: float    # max|x_k - x_{k-1}| / max|x_k|
    residual_norm: float  # max|b - C x_k| / max|b|
    converged: bool


@dataclass(frozen=True)
class SpectralEstimate:
    value: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class PrecheckResult:
    spectral_radius_t: SpectralEstimate
    spectral_radius_s: SpectralEstimate

    @property
    def passes(self) -> bool:
        return self.spectral_radius_t.value < 1.0 and self.spectral_radius_s.value < 1.0

    def to_dict(self) -> dict:
        return {
            "spectral_radius_t": self.spectral_radius_t.value,
            "t_converged": self.spectral_radius_t.converged,
            "spectral_radius_s": self.spectral_radius_s.value,
            "s_converged": self.spectral_radius_s.converged,
            "passes": self.passes,
        }


def _max_abs(x: np.ndarray) -> float:
    return float(np.max(np.abs(x))) if x.size else 0.0


def _relative(num: float, den: float) -> float:
    if den == 0:
        return 0.0 if num == 0 else np.inf
    return num / den


def _start(matrix: SparseMatrix, b: np.ndarray, x0: Optional[np.ndarray], dtype) -> np.ndarray:
    x = np.zeros(matrix.order, dtype=dtype)
    if x0 is not None:
        x[:] = matrix.check_vector(x0)
    return x


def gauss_seidel_iterates(
    matrix: SparseMatrix, b: np.ndarray, x0: Optional[np.ndarray] = None, steps: int = 1
) -> Iterator[np.ndarray]:
    """Yield a copy of each forward Gauss-Seidel iterate for C x = b"""
    op = matrix.sweep_operator(SweepMode.SOLVE)
    b = matrix.check_vector(b)
    x = _start(matrix, b, x0, np.result_type(op.dtype, b.dtype))
    rhs = b.astype(np.result_type(b.dtype, np.float64), copy=False)
    for _ in range(steps):
        op.apply(x, rhs)
        yield x.copy()


def gauss_seidel(
    matrix: SparseMatrix,
    b: np.ndarray,
    x0: Optional[np.ndarray] = None,
    tol: float = 5.0e-5,
    max_iter: int = 10000,
) -> SolveReport:
    """
    Forward-sweep Gauss-Seidel for C x = b; converges iff sp(T) < 1.

    Stops when either the relative change between successive iterates or the
    relative residual, both in max-norm, drops to ``tol``.

    Raises:
        ZeroDiagonalError: some c_ii is zero
        NonConvergenceError: ``max_iter`` sweeps without convergence
    """
    op = matrix.sweep_operator(SweepMode.SOLVE)
    b = matrix.check_vector(b)
    x = _start(matrix, b, x0, np.result_type(op.dtype, b.dtype))
    rhs = b.astype(np.result_type(b.dtype, np.float64), copy=False)
    b_norm = _max_abs(b)
    if b_norm == 0 and x0 is None:
        return SolveReport(x, 0, 0.0, 0.0, True)

    previous = x.copy()
    change = residual = np.inf
    for iteration in range(1, max_iter + 1):
        op.apply(x, rhs)
        change = _relative(_max_abs(x - previous), _max_abs(x))
        residual = _relative(_max_abs(b - matrix.matvec(x)), b_norm)
        if not np.isfinite(change):
            break
        if change <= tol or residual <= tol:
            return SolveReport(x, iteration, change, residual, True)
        previous[:] = x

    report = SolveReport(x, max_iter, change, residual, False)
    raise NonConvergenceError(
        f"Gauss-Seidel did not converge in {max_iter} iterations (change {change:.3g})", report=report
    )


def bicg(
    matrix: SparseMatrix,
    b: np.ndarray,
    x0: Optional[np.ndarray] = None,
    tol: float = 5.0e-5,
    max_iter: int = 10000,
) -> SolveReport:
    """
    Unpreconditioned bi-conjugate gradient; the shadow system runs on C^H.

    Inner products are hermitian, so for hermitian C the shadow residual
    equals the residual and the iteration reduces to conjugate gradients.

    Raises:
        BreakdownError: rho or p~^H C p collapses relative to its factors
        NonConvergenceError: ``max_iter`` iterations without convergence
    """
    b = matrix.check_vector(b)
    dtype = np.result_type(matrix.dtype, b.dtype, np.float64)
    x = _start(matrix, b, x0, dtype)
    b_norm = _max_abs(b)

    r = b - matrix.matvec(x) if x0 is not None else b.astype(dtype)
    if _relative(_max_abs(r), b_norm) <= tol or b_norm == 0:
        return SolveReport(x, 0, 0.0, _relative(_max_abs(r), b_norm), True)

    r_shadow = r.copy()
    p = r.copy()
    p_shadow = r_shadow.copy()
    rho = np.vdot(r_shadow, r)
    eps = np.finfo(np.float64).eps
    change = residual = np.inf

    for iteration in range(1, max_iter + 1):
        q = matrix.matvec(p)
        q_shadow = matrix.rmatvec(p_shadow)
        denom = np.vdot(p_shadow, q)
        if abs(denom) <= eps * np.linalg.norm(p_shadow) * np.linalg.norm(q) or abs(denom) < _TINY:
            raise BreakdownError(f"BiCG breakdown at iteration {iteration}: p~^H C p vanished",
                                 iteration=iteration)
        alpha = rho / denom
        step = alpha * p
        x += step
        r -= alpha * q
        r_shadow -= np.conj(alpha) * q_shadow

        change = _relative(_max_abs(step), _max_abs(x))
        residual = _relative(_max_abs(r), b_norm)
        if change <= tol or residual <= tol:
            return SolveReport(x, iteration, change, residual, True)

        rho_next = np.vdot(r_shadow, r)
        if abs(rho_next) <= eps * np.linalg.norm(r_shadow) * np.linalg.norm(r) or abs(rho_next) < _TINY:
            raise BreakdownError(f"BiCG breakdown at iteration {iteration}: rho vanished", iteration=iteration)
        beta = rho_next / rho
        rho = rho_next
        p = r + beta * p
        p_shadow = r_shadow + np.conj(beta) * p_shadow

    report = SolveReport(x, max_iter, change, residual, False)
    raise NonConvergenceError(f"BiCG did not converge in {max_iter} iterations (residual {residual:.3g})",
                              report=report)


def dense_lu_inverse(matrix: SparseMatrix, cap: int = DEFAULT_ORDER_CAP) -> np.ndarray:
    """
    Full inverse through a partially pivoted LU factorization (ground truth).

    Raises:
        OrderCapExceededError: order above ``cap``
        SingularMatrixError: a zero pivot
    """
    if matrix.order > cap:
        raise OrderCapExceededError(f"dense oracle limited to order {cap}, got {matrix.order}",
                                    order=matrix.order, cap=cap)
    dense = matrix.to_dense()
    lu, piv = scipy.linalg.lu_factor(dense, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if np.any(pivots == 0) or np.min(pivots) <= np.finfo(np.float64).eps * np.max(pivots) * matrix.order:
        raise SingularMatrixError("matrix is singular to working precision")
    return scipy.linalg.lu_solve((lu, piv), np.eye(matrix.order, dtype=dense.dtype))


def dense_trace(matrix: SparseMatrix, query: Optional[TraceQuery] = None, cap: int = DEFAULT_ORDER_CAP):
    """tr(Q C^-1) from the dense inverse"""
    query = query or TraceQuery.identity()
    query.validate_for(matrix.order)
    value = query.dense_trace(dense_lu_inverse(matrix, cap))
    return complex(value) if np.iscomplexobj(value) else float(value)


def spectral_radius_estimate(
    matrix: SparseMatrix,
    operator: str = "T",
    tol: float = 1.0e-6,
    max_iter: int = 1000,
    seed: int = 12345,
) -> SpectralEstimate:
    """
    Power iteration estimate of sp(T), T = (D+L)^-1 U, or of sp(S), S = L (D+U)^-1.

    T x is one zero right-hand-side sweep over the rows of C (up to sign);
    S is handled through S^H, which is the same sweep over the rows of C^H.
    Stagnation is reported through ``converged`` rather than raised.

    Raises:
        ZeroDiagonalError: some c_ii is zero
    """
    if operator not in ("T", "S"):
        raise ValueError("operator must be 'T' or 'S'")
    op = matrix.sweep_operator(SweepMode.SOLVE, adjoint=(operator == "S"))
    rng = np.random.default_rng(seed)
    x = (rng.standard_normal(matrix.order) + 1j * rng.standard_normal(matrix.order)).astype(np.complex128)
    x /= np.linalg.norm(x)
    zero = np.zeros(matrix.order)

    estimate = previous = 0.0
    for iteration in range(1, max_iter + 1):
        op.apply(x, zero)
        norm = float(np.linalg.norm(x))
        if norm == 0.0 or not np.isfinite(norm):
            converged = norm == 0.0
            return SpectralEstimate(0.0 if converged else np.inf, iteration, converged)
        estimate = norm
        x /= norm
        if iteration > 1 and abs(estimate - previous) <= tol * estimate:
            return SpectralEstimate(estimate, iteration, True)
        previous = estimate

    logger.warning(f"power iteration for sp({operator}) stagnated after {max_iter} iterations at {estimate:.6g}")
    return SpectralEstimate(estimate, max_iter, False)


def precheck(matrix: SparseMatrix, max_iter: int = 1000, tol: float = 1.0e-6, seed: int = 12345) -> PrecheckResult:
    """Estimate sp(T) and sp(S); CC converges iff both are below one"""
    matrix.require_nonzero_diagonal()
    result = PrecheckResult(
        spectral_radius_t=spectral_radius_estimate(matrix, "T", tol, max_iter, seed),
        spectral_radius_s=spectral_radius_estimate(matrix, "S", tol, max_iter, seed),
    )
    logger.info(
        f"Precheck: sp(T) ~ {result.spectral_radius_t.value:.4g}, sp(S) ~ {result.spectral_radius_s.value:.4g} "
        f"-> {'pass' if result.passes else 'FAIL'}"
    )
    return result
