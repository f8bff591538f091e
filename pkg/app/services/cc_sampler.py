"""
Correlated Chains sampler.

Two vectors are swept every cycle with the same noise vector Phi^(k):

    z_i <- phi_i / sqrt(c_ii)       - (sum_{j != i} c_ij  z_j) / c_ii
    w_i <- phi_i / conj(sqrt(c_ii)) - (sum_{j != i} c*_ji w_j) / conj(c_ii)

in increasing i, so E(z w^H) = C^-1 and tr(Q C^-1) is the mean of z^H Q w.
For hermitian C the two recurrences coincide and only z is needed (the
Gibbs sampler, see :func:`gs_estimate_trace`).
"""
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from app.core.exceptions import (
    ConfigError,
    DimensionMismatchError,
    DivergenceError,
    NonFiniteSampleError,
    NotHermitianError,
)
from app.models.sampling import BurnInConfig, NoiseSpec, StartKind, StoppingRule
from app.services.diagnostics import MIN_SERIES_LENGTH, SeriesSummary, summarize
from app.services.noise import draw
from app.services.sparse_matrix import SparseMatrix, SweepMode
from app.services.trace_query import QueryKind, TraceQuery

Entry = Tuple[int, int]
HERMITIAN_RTOL = 1e-12


@dataclass
class ChainState:
    """Coupled vectors after cycle ``k``; ``w is z`` for the Gibbs sampler"""
    z: np.ndarray
    w: np.ndarray
    k: int = 0


@dataclass
class BurnInResult:
    burn_in_cycles: int
    state: ChainState
    trajectory: List[float]
    seconds: float = 0.0


@dataclass
class CcEstimate:
    """Monte Carlo estimate with its error bar and chain bookkeeping"""
    value: Union[float, complex]
    mc_std_error: float
    samples: np.ndarray
    burn_in_cycles: int
    total_cycles: int
    effective_length: float
    sample_variance: float
    converged: bool
    method: str = "cc"
    burn_in_seconds: float = 0.0
    sampling_seconds: float = 0.0
    systems: Optional[int] = None
    total_rounds: Optional[int] = None
    extras: Dict[str, float] = field(default_factory=dict)

    @property
    def sampling_cycles(self) -> int:
        return self.total_cycles - self.burn_in_cycles

    @property
    def relative_error(self) -> float:
        scale = abs(self.value)
        if scale == 0:
            return 0.0 if self.mc_std_error == 0 else np.inf
        return self.mc_std_error / scale

    @classmethod
    def from_summary(cls, summary: SeriesSummary, samples: np.ndarray, **kwargs) -> "CcEstimate":
        return cls(
            value=summary.mean,
            mc_std_error=summary.mc_std_error,
            samples=samples,
            effective_length=summary.effective_length,
            sample_variance=summary.variance,
            **kwargs,
        )


# ------------------------------------------------------------------ sweeps


def sweep_z(matrix: SparseMatrix, z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """One in-place z-sweep over the rows of C.

    Raises:
        ZeroDiagonalError: some c_ii is zero
    """
    return matrix.sweep_operator(SweepMode.NOISE, adjoint=False).apply(z, phi)


def sweep_w(matrix: SparseMatrix, w: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """One in-place w-sweep over the adjoint rows of C"""
    return matrix.sweep_operator(SweepMode.NOISE, adjoint=True).apply(w, phi)


def chain_dtype(matrix: SparseMatrix) -> np.dtype:
    """Complex whenever C is complex or has a negative real diagonal"""
    return np.result_type(
        matrix.sweep_operator(SweepMode.NOISE, adjoint=False).dtype,
        matrix.sweep_operator(SweepMode.NOISE, adjoint=True).dtype,
    )


def start_vector(kind: StartKind, n: int, dtype) -> np.ndarray:
    if kind is StartKind.ZEROS:
        return np.zeros(n, dtype=dtype)
    if kind is StartKind.ONES:
        return np.ones(n, dtype=dtype)
    return np.arange(1, n + 1).astype(dtype)


def _max_abs(x: np.ndarray) -> float:
    return float(np.max(np.abs(x)))


def _gap(a: np.ndarray, b: np.ndarray) -> float:
    diff = _max_abs(b - a)
    scale = _max_abs(a)
    return diff / scale if scale > 0 else diff


def _check_noise(matrix: SparseMatrix, noise: NoiseSpec) -> None:
    if noise.dimension != matrix.order:
        raise DimensionMismatchError(
            f"noise dimension {noise.dimension} differs from matrix order {matrix.order}",
            expected=matrix.order, got=noise.dimension,
        )


def _check_growth(vectors: Sequence[np.ndarray], threshold: float, cycle: int, trajectory: List[float]) -> None:
    for v in vectors:
        size = _max_abs(v)
        if not np.isfinite(size) or size > threshold:
            raise DivergenceError(
                f"iterates exceeded {threshold:.3g} at cycle {cycle}: sp(T) >= 1 or sp(S) >= 1 "
                "(a different block partition or row/column ordering may restore convergence)",
                cycle=cycle, trajectory=trajectory,
            )


def _require_hermitian(matrix: SparseMatrix) -> None:
    if not matrix.is_hermitian(HERMITIAN_RTOL):
        raise NotHermitianError("the Gibbs sampler needs a hermitian matrix; use the CC method instead")


# ----------------------------------------------------------------- burn-in


def run_burn_in(
    matrix: SparseMatrix,
    noise: NoiseSpec,
    cfg: Optional[BurnInConfig] = None,
    coupled: bool = True,
) -> BurnInResult:
    """
    Coupled-chain burn-in.

    Chains z1, w1 start at ``cfg.primary_start`` and z2, w2 at
    ``cfg.partner_start``; all four see the same Phi^(k). Burn-in ends at the
    first cycle N where max|z2 - z1| / max|z1| and the same w ratio are both
    below ``cfg.tolerance``. With ``coupled=False`` only the z pair runs
    (Gibbs sampler).

    Returns:
        BurnInResult: N, the surviving pair (z1, w1) and the per-cycle gap trajectory

    Raises:
        DivergenceError: iterates exceed the divergence threshold or fail to couple
            within ``cfg.max_cycles``
        ZeroDiagonalError: some c_ii is zero
    """
    cfg = cfg or BurnInConfig()
    _check_noise(matrix, noise)
    op_z = matrix.sweep_operator(SweepMode.NOISE, adjoint=False)
    op_w = matrix.sweep_operator(SweepMode.NOISE, adjoint=True) if coupled else None
    dtype = chain_dtype(matrix) if coupled else op_z.dtype
    n = matrix.order

    z1 = start_vector(cfg.primary_start, n, dtype)
    z2 = start_vector(cfg.partner_start, n, dtype)
    w1 = start_vector(cfg.primary_start, n, dtype) if coupled else z1
    w2 = start_vector(cfg.partner_start, n, dtype) if coupled else z2

    trajectory: List[float] = []
    started = time.perf_counter()
    for k in range(1, cfg.max_cycles + 1):
        phi = draw(noise, k)
        op_z.apply(z1, phi)
        op_z.apply(z2, phi)
        if coupled:
            op_w.apply(w1, phi)
            op_w.apply(w2, phi)
            _check_growth((z1, z2, w1, w2), cfg.divergence_threshold, k, trajectory)
            gap = max(_gap(z1, z2), _gap(w1, w2))
        else:
            _check_growth((z1, z2), cfg.divergence_threshold, k, trajectory)
            gap = _gap(z1, z2)
        trajectory.append(gap)

        if gap < cfg.tolerance:
            seconds = time.perf_counter() - started
            logger.info(f"Burn-in reached after N={k} cycles ({seconds:.3f}s)")
            return BurnInResult(k, ChainState(z1, w1, k), trajectory, seconds)

    raise DivergenceError(
        f"coupled chains did not meet within {cfg.max_cycles} cycles (last gap {trajectory[-1]:.3g}); "
        "sp(T) >= 1 or sp(S) >= 1 is likely",
        cycle=cfg.max_cycles, trajectory=trajectory,
    )


# ---------------------------------------------------------------- sampling


@dataclass
class _SamplingRun:
    samples: np.ndarray  # shape (cycles, series)
    summaries: List[SeriesSummary]
    burn_in: BurnInResult
    total_cycles: int
    converged: bool
    seconds: float


def _sample(
    matrix: SparseMatrix,
    noise: NoiseSpec,
    cfg: BurnInConfig,
    stop: StoppingRule,
    sample_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    n_series: int,
    sample_dtype,
    coupled: bool,
    label: str,
) -> _SamplingRun:
    burn = run_burn_in(matrix, noise, cfg, coupled=coupled)
    z, w = burn.state.z, burn.state.w
    op_z = matrix.sweep_operator(SweepMode.NOISE, adjoint=False)
    op_w = matrix.sweep_operator(SweepMode.NOISE, adjoint=True) if coupled else None

    capacity = max(stop.check_every, 1024)
    buffer = np.empty((capacity, n_series), dtype=sample_dtype)
    count = 0
    k = burn.burn_in_cycles
    converged = False
    summaries: List[SeriesSummary] = []
    started = time.perf_counter()

    # sampling always covers at least one checkpoint, so M > N even when the cap is tight
    while True:
        k += 1
        phi = draw(noise, k)
        op_z.apply(z, phi)
        if coupled:
            op_w.apply(w, phi)
        _check_growth((z, w) if coupled else (z,), cfg.divergence_threshold, k, burn.trajectory)

        sample = sample_fn(z, w)
        if not np.all(np.isfinite(sample)):
            raise NonFiniteSampleError(k)
        if count == capacity:
            capacity *= 2
            buffer = np.resize(buffer, (capacity, n_series))
        buffer[count] = sample
        count += 1

        if count % stop.check_every or count < MIN_SERIES_LENGTH:
            continue
        summaries = [summarize(buffer[:count, e]) for e in range(n_series)]
        scale = max(abs(s.mean) for s in summaries)
        worst = max(s.mc_std_error for s in summaries)
        logger.debug(f"{label} cycle {k}: scale {scale:.6g}, worst MC error {worst:.3g}")
        if worst <= stop.rel_tolerance * scale:
            converged = True
            break
        if k >= stop.max_cycles:
            logger.warning(f"{label}: cycle cap {stop.max_cycles} reached before the target error")
            break

    seconds = time.perf_counter() - started
    logger.info(f"{label}: {count} sampling cycles after N={burn.burn_in_cycles} ({seconds:.3f}s)")
    return _SamplingRun(buffer[:count].copy(), summaries, burn, k, converged, seconds)


def _trace_dtype(matrix: SparseMatrix, query: TraceQuery, coupled: bool):
    dtype = chain_dtype(matrix) if coupled else matrix.sweep_operator(SweepMode.NOISE).dtype
    if query.kind is QueryKind.GENERAL:
        dtype = np.result_type(dtype, query.matrix.dtype)
    return dtype


def _trace_estimate(matrix, query, noise, cfg, stop, coupled: bool, method: str) -> CcEstimate:
    cfg = cfg or BurnInConfig()
    stop = stop or StoppingRule()
    query = query or TraceQuery.identity()
    query.validate_for(matrix.order)
    run = _sample(
        matrix, noise, cfg, stop,
        sample_fn=lambda z, w: query.quadratic(z, w),
        n_series=1,
        sample_dtype=_trace_dtype(matrix, query, coupled),
        coupled=coupled,
        label=f"{method.upper()} trace",
    )
    series = run.samples[:, 0]
    return CcEstimate.from_summary(
        run.summaries[0], series,
        burn_in_cycles=run.burn_in.burn_in_cycles,
        total_cycles=run.total_cycles,
        converged=run.converged,
        method=method,
        burn_in_seconds=run.burn_in.seconds,
        sampling_seconds=run.seconds,
    )


def _element_estimates(matrix, entries, noise, cfg, stop, coupled: bool, method: str) -> Dict[Entry, CcEstimate]:
    entries = [(int(i), int(j)) for i, j in entries]
    if not entries:
        raise ConfigError("entry list must not be empty")
    for i, j in entries:
        if not (0 <= i < matrix.order and 0 <= j < matrix.order):
            raise ConfigError(f"entry ({i}, {j}) outside a matrix of order {matrix.order}")
    rows = np.array([e[0] for e in entries])
    cols = np.array([e[1] for e in entries])
    cfg = cfg or BurnInConfig()
    stop = stop or StoppingRule()
    dtype = chain_dtype(matrix) if coupled else matrix.sweep_operator(SweepMode.NOISE).dtype

    run = _sample(
        matrix, noise, cfg, stop,
        sample_fn=lambda z, w: z[rows] * np.conj(w[cols]),
        n_series=len(entries),
        sample_dtype=dtype,
        coupled=coupled,
        label=f"{method.upper()} elements",
    )
    return {
        entry: CcEstimate.from_summary(
            run.summaries[e], run.samples[:, e],
            burn_in_cycles=run.burn_in.burn_in_cycles,
            total_cycles=run.total_cycles,
            converged=run.converged,
            method=method,
            burn_in_seconds=run.burn_in.seconds,
            sampling_seconds=run.seconds,
        )
        for e, entry in enumerate(entries)
    }


def estimate_trace(
    matrix: SparseMatrix,
    query: Optional[TraceQuery],
    noise: NoiseSpec,
    cfg: Optional[BurnInConfig] = None,
    stop: Optional[StoppingRule] = None,
) -> CcEstimate:
    """
    CC estimate of tr(Q C^-1) as the running mean of z^(k)^H Q w^(k).

    The stopping rule is checked every ``stop.check_every`` cycles against the
    Geyer MC standard error relative to |estimate|.

    Raises:
        DivergenceError: during burn-in or sampling
        NonFiniteSampleError: a sample turned non-finite
    """
    return _trace_estimate(matrix, query, noise, cfg, stop, coupled=True, method="cc")


def estimate_inverse_elements(
    matrix: SparseMatrix,
    entries: Sequence[Entry],
    noise: NoiseSpec,
    cfg: Optional[BurnInConfig] = None,
    stop: Optional[StoppingRule] = None,
) -> Dict[Entry, CcEstimate]:
    """
    CC estimates of selected entries of C^-1 from z_i conj(w_j).

    All entries stop together once each MC error is below ``rel_tolerance``
    times the largest estimated magnitude among them.
    """
    return _element_estimates(matrix, entries, noise, cfg, stop, coupled=True, method="cc")


def gs_estimate_trace(
    matrix: SparseMatrix,
    query: Optional[TraceQuery],
    noise: NoiseSpec,
    cfg: Optional[BurnInConfig] = None,
    stop: Optional[StoppingRule] = None,
) -> CcEstimate:
    """Gibbs-sampler estimate of tr(Q C^-1) from z^H Q z; hermitian C only.

    Raises:
        NotHermitianError: C is not hermitian
    """
    _require_hermitian(matrix)
    return _trace_estimate(matrix, query, noise, cfg, stop, coupled=False, method="gs")


def gs_estimate_inverse_elements(
    matrix: SparseMatrix,
    entries: Sequence[Entry],
    noise: NoiseSpec,
    cfg: Optional[BurnInConfig] = None,
    stop: Optional[StoppingRule] = None,
) -> Dict[Entry, CcEstimate]:
    _require_hermitian(matrix)
    return _element_estimates(matrix, entries, noise, cfg, stop, coupled=False, method="gs")
