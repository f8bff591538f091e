"""
Stochastic Estimation baseline.

Each system s solves C v = Phi^(s) from a zero start and records
Phi^(s)^H Q v, whose mean is tr(Q C^-1). Samples are independent, so the
error bar is the plain standard error and no burn-in is needed.
"""
import time
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from loguru import logger

from app.core.exceptions import ConfigError, DimensionMismatchError
from app.models.sampling import InnerSolver, NoiseSpec, SeConfig
from app.services.cc_sampler import CcEstimate, Entry
from app.services.diagnostics import MIN_IID_LENGTH, SeriesSummary, iid_summary
from app.services.iter_solvers import SolveReport, bicg, gauss_seidel
from app.services.noise import draw
from app.services.sparse_matrix import SparseMatrix
from app.services.trace_query import TraceQuery


def _solver(cfg: SeConfig) -> Callable[[SparseMatrix, np.ndarray], SolveReport]:
    solve = bicg if cfg.inner_solver is InnerSolver.BICG else gauss_seidel
    return lambda matrix, b: solve(matrix, b, tol=cfg.inner_tolerance, max_iter=cfg.inner_max_iter)


def _run(
    matrix: SparseMatrix,
    noise: NoiseSpec,
    cfg: SeConfig,
    sample_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    n_series: int,
    label: str,
):
    if noise.dimension != matrix.order:
        raise DimensionMismatchError(
            f"noise dimension {noise.dimension} differs from matrix order {matrix.order}",
            expected=matrix.order, got=noise.dimension,
        )
    solve = _solver(cfg)
    stop = cfg.stop
    rows = []
    rounds = 0
    converged = False
    summaries = []
    started = time.perf_counter()

    system = 0
    while True:
        system += 1
        phi = draw(noise, system)
        report = solve(matrix, phi)  # NonConvergenceError propagates
        rounds += report.iterations
        rows.append(np.atleast_1d(sample_fn(phi, report.solution)))

        if system % stop.check_every or system < MIN_IID_LENGTH:
            continue
        samples = np.vstack(rows)
        summaries = [iid_summary(samples[:, e]) for e in range(n_series)]
        scale = max(abs(s.mean) for s in summaries)
        worst = max(s.mc_std_error for s in summaries)
        logger.debug(f"{label} system {system}: scale {scale:.6g}, worst error {worst:.3g}, rounds {rounds}")
        if worst <= stop.rel_tolerance * scale:
            converged = True
            break
        if system >= stop.max_cycles:
            logger.warning(f"{label}: system cap {stop.max_cycles} reached before the target error")
            break

    seconds = time.perf_counter() - started
    logger.info(f"{label}: {system} systems, {rounds} rounds ({rounds / system:.2f} per system, {seconds:.3f}s)")
    return np.vstack(rows), summaries, system, rounds, converged, seconds


def _estimate(summary: SeriesSummary, samples: np.ndarray, systems: int, rounds: int,
              converged: bool, seconds: float) -> CcEstimate:
    return CcEstimate.from_summary(
        summary, samples,
        burn_in_cycles=0,
        total_cycles=systems,
        converged=converged,
        method="se",
        sampling_seconds=seconds,
        systems=systems,
        total_rounds=rounds,
        extras={"rounds_per_system": rounds / systems},
    )


def se_estimate_trace(
    matrix: SparseMatrix,
    query: Optional[TraceQuery],
    noise: NoiseSpec,
    cfg: Optional[SeConfig] = None,
) -> CcEstimate:
    """
    SE estimate of tr(Q C^-1).

    Args:
        matrix: C
        query: Q, identity when omitted
        noise: noise stream; system s uses the draw of cycle s
        cfg: inner solver and stopping rule

    Raises:
        NonConvergenceError: an inner solve failed
        BreakdownError: BiCG broke down
    """
    cfg = cfg or SeConfig()
    query = query or TraceQuery.identity()
    query.validate_for(matrix.order)
    samples, summaries, systems, rounds, converged, seconds = _run(
        matrix, noise, cfg,
        sample_fn=lambda phi, v: query.quadratic(phi, v),
        n_series=1,
        label="SE trace",
    )
    return _estimate(summaries[0], samples[:, 0], systems, rounds, converged, seconds)


def se_estimate_inverse_elements(
    matrix: SparseMatrix,
    entries: Sequence[Entry],
    noise: NoiseSpec,
    cfg: Optional[SeConfig] = None,
) -> Dict[Entry, CcEstimate]:
    """SE estimates of entries of C^-1 from v_i conj(phi_j)"""
    entries = [(int(i), int(j)) for i, j in entries]
    if not entries:
        raise ConfigError("entry list must not be empty")
    for i, j in entries:
        if not (0 <= i < matrix.order and 0 <= j < matrix.order):
            raise ConfigError(f"entry ({i}, {j}) outside a matrix of order {matrix.order}")
    rows = np.array([e[0] for e in entries])
    cols = np.array([e[1] for e in entries])
    cfg = cfg or SeConfig()

    samples, summaries, systems, rounds, converged, seconds = _run(
        matrix, noise, cfg,
        sample_fn=lambda phi, v: v[rows] * np.conj(phi[cols]),
        n_series=len(entries),
        label="SE elements",
    )
    return {
        entry: _estimate(summaries[e], samples[:, e], systems, rounds, converged, seconds)
        for e, entry in enumerate(entries)
    }
