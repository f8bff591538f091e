"""
Experiment runner: loads or generates the target matrix, gates it on the
spectral-radius precheck, runs replicate estimates concurrently and turns
them into a RunReport.
"""
import asyncio
import math
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, TypeVar

import numpy as np
from loguru import logger

from app.core.config import Settings, get_settings
from app.core.exceptions import ConvergenceGateError, MismatchedTargetsError
from app.models.experiment import ExperimentConfig
from app.models.report import ElementResult, Method, ReplicateResult, RunReport, TimingReport
from app.models.sampling import NoiseSpec, StoppingRule
from app.services.cc_sampler import (
    CcEstimate,
    Entry,
    chain_dtype,
    estimate_inverse_elements,
    estimate_trace,
    gs_estimate_inverse_elements,
    gs_estimate_trace,
)
from app.services.diagnostics import dump_series_csv, empirical_std_error, render_report_table
from app.services.generators import build_dirac_matrix, build_mixed_model_matrix, simulate_pedigree
from app.services.iter_solvers import PrecheckResult, dense_lu_inverse, dense_trace, precheck
from app.services.se_estimator import se_estimate_inverse_elements, se_estimate_trace
from app.services.sparse_matrix import SparseMatrix, read_matrix_market
from app.services.trace_query import TraceQuery
from app.utils.helpers import format_scalar, get_current_local_time
from app.utils.performance_monitor import get_performance_monitor


@dataclass
class LoadedTarget:
    matrix: SparseMatrix
    source: str
    boundary_conditions: Optional[str] = None


def load_target(config: ExperimentConfig, settings: Settings) -> LoadedTarget:
    """Read or generate the matrix named by the configuration"""
    if config.matrix_path is not None:
        return LoadedTarget(read_matrix_market(config.matrix_path), config.source_label())
    if config.wu_schaeffer is not None:
        ws = config.wu_schaeffer
        pedigree = simulate_pedigree(ws.n_animals, ws.n_herds, ws.generations, ws.seed, ws.unknown_parent_fraction)
        return LoadedTarget(build_mixed_model_matrix(pedigree, ws.mixed_model), config.source_label())
    return LoadedTarget(build_dirac_matrix(config.dirac), config.source_label(), boundary_conditions="periodic")


def _gate(matrix: SparseMatrix, config: ExperimentConfig, settings: Settings) -> PrecheckResult:
    result = precheck(
        matrix,
        max_iter=settings.solvers.power_iterations,
        tol=settings.solvers.power_tolerance,
        seed=settings.solvers.power_seed,
    )
    if not result.passes:
        message = (f"precheck failed: sp(T) ~ {result.spectral_radius_t.value:.4g}, "
                   f"sp(S) ~ {result.spectral_radius_s.value:.4g}; CC requires both below 1")
        if not config.force:
            raise ConvergenceGateError(message, spectral_radii=result.to_dict())
        logger.warning(f"{message} (continuing because of --force)")
    return result


def _estimator(config: ExperimentConfig, matrix: SparseMatrix, query: TraceQuery,
               stop: StoppingRule) -> Callable[[int], CcEstimate]:
    """Replicate function: seed -> estimate"""

    def noise(seed: int) -> NoiseSpec:
        return NoiseSpec(family=config.noise_family, seed=seed % 2**64, dimension=matrix.order)

    if config.method is Method.CC:
        return lambda seed: estimate_trace(matrix, query, noise(seed), config.burn_in, stop)
    if config.method is Method.GS:
        return lambda seed: gs_estimate_trace(matrix, query, noise(seed), config.burn_in, stop)
    se = config.se.model_copy(update={"stop": stop})
    return lambda seed: se_estimate_trace(matrix, query, noise(seed), se)


def _element_estimator(config: ExperimentConfig, matrix: SparseMatrix,
                       stop: StoppingRule) -> Callable[[int], Dict[Entry, CcEstimate]]:
    """Replicate function: seed -> estimates of ``config.entries``"""
    entries = [tuple(e) for e in config.entries]

    def noise(seed: int) -> NoiseSpec:
        return NoiseSpec(family=config.noise_family, seed=seed % 2**64, dimension=matrix.order)

    if config.method is Method.CC:
        return lambda seed: estimate_inverse_elements(matrix, entries, noise(seed), config.burn_in, stop)
    if config.method is Method.GS:
        return lambda seed: gs_estimate_inverse_elements(matrix, entries, noise(seed), config.burn_in, stop)
    se = config.se.model_copy(update={"stop": stop})
    return lambda seed: se_estimate_inverse_elements(matrix, entries, noise(seed), se)


R = TypeVar("R")


async def run_replicates(run: Callable[[int], R], seeds: List[int], jobs: int) -> List[R]:
    """Run one estimate per seed, at most ``jobs`` at a time, each in a worker thread"""
    semaphore = asyncio.Semaphore(jobs)
    loop = asyncio.get_running_loop()

    with ThreadPoolExecutor(max_workers=jobs, thread_name_prefix="replicate") as executor:
        async def one(index: int, seed: int) -> R:
            async with semaphore:
                logger.debug(f"Replicate {index + 1}/{len(seeds)} (seed {seed}) started")
                return await loop.run_in_executor(executor, run, seed)

        return list(await asyncio.gather(*(one(i, s) for i, s in enumerate(seeds))))


def _merge(estimates: List[CcEstimate]):
    """Effective-length weighted mean and its standard error"""
    weights = np.array([e.effective_length for e in estimates])
    values = np.array([e.value for e in estimates])
    errors = np.array([e.mc_std_error for e in estimates])
    total = weights.sum()
    if total == 0:
        return complex(values.mean()), float(errors.mean()), 0.0
    value = complex(np.sum(weights * values) / total)
    error = float(np.sqrt(np.sum((weights * errors) ** 2)) / total)
    return value, error, float(total)


def _timings(estimates: List[CcEstimate], method: Method) -> TimingReport:
    burn_in_seconds = sum(e.burn_in_seconds for e in estimates)
    sampling_seconds = sum(e.sampling_seconds for e in estimates)
    burn_in_cycles = sum(e.burn_in_cycles for e in estimates)
    sampling_cycles = sum(e.sampling_cycles for e in estimates)
    effective = sum(e.effective_length for e in estimates)

    timings = TimingReport(burn_in_seconds=burn_in_seconds, sampling_seconds=sampling_seconds)
    if effective > 0:
        timings.seconds_per_effective_cycle = sampling_seconds / effective
    if method is Method.SE:
        systems = sum(e.systems or 0 for e in estimates)
        rounds = sum(e.total_rounds or 0 for e in estimates)
        timings.seconds_per_system = sampling_seconds / systems if systems else None
        timings.seconds_per_round = sampling_seconds / rounds if rounds else None
    else:
        timings.seconds_per_burn_in_cycle = burn_in_seconds / burn_in_cycles if burn_in_cycles else None
        timings.seconds_per_cycle = sampling_seconds / sampling_cycles if sampling_cycles else None
    return timings


def _baseline_seconds(config: ExperimentConfig) -> Optional[float]:
    if not config.baseline_report_path:
        return None
    baseline = RunReport.load(config.baseline_report_path)
    return baseline.timings.seconds_per_cycle or baseline.timings.seconds_per_system


def _element_results(entries: List[Entry], runs: List[Dict[Entry, CcEstimate]]) -> List[ElementResult]:
    results = []
    for entry in entries:
        value, error, effective = _merge([run[entry] for run in runs])
        results.append(ElementResult(row=entry[0], col=entry[1], estimate_real=value.real,
                                     estimate_imag=value.imag, mc_std_error=error, effective_length=effective))
    return results


def _query_label(config: ExperimentConfig, query: TraceQuery) -> str:
    if config.entries is None:
        return query.describe()
    return "entries:" + ";".join(f"{i},{j}" for i, j in config.entries)


def _base_report(config: ExperimentConfig, settings: Settings, target: LoadedTarget, query: TraceQuery) -> dict:
    matrix = target.matrix
    return dict(
        method=config.method,
        created_at=get_current_local_time(settings.report.timezone),
        matrix_source=target.source,
        matrix_fingerprint=matrix.fingerprint(),
        order=matrix.order,
        nnz=matrix.nnz,
        scalar_kind=matrix.kind.value,
        query=_query_label(config, query),
        boundary_conditions=target.boundary_conditions,
        config=config.model_dump(mode="json"),
    )


def _oracle_report(config, settings, target, query, started: float) -> RunReport:
    value = complex(dense_trace(target.matrix, query, settings.solvers.dense_order_cap))
    report = RunReport(
        **_base_report(config, settings, target, query),
        estimate_real=value.real, estimate_imag=value.imag,
        exact_real=value.real, exact_imag=value.imag,
    )
    report.timings.total_seconds = time.perf_counter() - started
    logger.info(f"Dense LU trace: {format_scalar(value, 12)}")
    return report


async def run_experiment_async(config: ExperimentConfig, settings: Optional[Settings] = None) -> RunReport:
    """Asynchronous body of :func:`run_experiment`"""
    settings = settings or get_settings()
    monitor = get_performance_monitor()
    run_id = f"{config.method.value}-{uuid.uuid4().hex[:8]}"
    metrics = monitor.start_run(run_id, config.method.value)
    started = time.perf_counter()

    try:
        target = load_target(config, settings)
        matrix = target.matrix
        query = TraceQuery.parse(config.query, matrix.order)
        logger.info(f"Target {target.source}: {matrix}, query {_query_label(config, query)}")

        if config.method is Method.ORACLE:
            report = _oracle_report(config, settings, target, query, started)
        else:
            report = await _sampled_report(config, settings, target, query, started)
    except Exception as e:
        monitor.end_run(run_id, status="failed", error_message=str(e))
        raise

    metrics = monitor.end_run(run_id, cycles=report.total_cycles) or metrics
    report.timings.cpu_seconds = metrics.cpu_seconds
    report.timings.normalize(_baseline_seconds(config))

    if config.report_path:
        report.save(config.report_path)
        logger.info(f"Report written to {config.report_path}")
    return report


async def _sampled_report(config, settings, target: LoadedTarget, query: TraceQuery, started: float) -> RunReport:
    matrix = target.matrix
    gate = _gate(matrix, config, settings)
    chain_dtype(matrix)  # build both sweep operators before worker threads share the matrix

    stop = StoppingRule.for_kind(matrix.is_complex, settings, config.rel_tolerance, config.max_cycles)
    seeds = [(config.seed + r) % 2**64 for r in range(config.replicates)]
    element_runs: List[Dict[Entry, CcEstimate]] = []
    if config.entries is None:
        estimates = await run_replicates(_estimator(config, matrix, query, stop), seeds, config.jobs)
    else:
        element_runs = await run_replicates(_element_estimator(config, matrix, stop), seeds, config.jobs)
        headline = tuple(config.entries[0])
        estimates = [run[headline] for run in element_runs]

    value, error, effective = _merge(estimates)
    report = RunReport(
        **_base_report(config, settings, target, query),
        seed=config.seed,
        noise_family=config.noise_family.value,
        burn_in_cycles=sum(e.burn_in_cycles for e in estimates),
        sampling_cycles=sum(e.sampling_cycles for e in estimates),
        total_cycles=sum(e.total_cycles for e in estimates),
        effective_length=effective,
        estimate_real=value.real,
        estimate_imag=value.imag,
        sample_variance=float(np.mean([e.sample_variance for e in estimates])),
        mc_std_error=error,
        converged=all(e.converged for e in estimates),
        replicates=config.replicates,
        replicate_results=[
            ReplicateResult(
                seed=seed,
                estimate_real=complex(e.value).real,
                estimate_imag=complex(e.value).imag,
                mc_std_error=e.mc_std_error,
                effective_length=e.effective_length,
                burn_in_cycles=e.burn_in_cycles,
                total_cycles=e.total_cycles,
            )
            for seed, e in zip(seeds, estimates)
        ],
        spectral_radius_t=gate.spectral_radius_t.value,
        spectral_radius_s=gate.spectral_radius_s.value,
        timings=_timings(estimates, config.method),
    )

    if config.replicates >= 2:
        report.empirical_std_error = empirical_std_error([e.value for e in estimates])
        report.geyer_mean_std_error = float(np.mean([e.mc_std_error for e in estimates]))
    if config.method is Method.SE:
        report.se_systems = sum(e.systems for e in estimates)
        report.se_total_rounds = sum(e.total_rounds for e in estimates)
        report.se_rounds_per_system = report.se_total_rounds / report.se_systems
    if element_runs:
        report.element_results = _element_results([tuple(e) for e in config.entries], element_runs)

    if config.with_exact:
        if matrix.order <= settings.solvers.dense_order_cap:
            if config.entries is None:
                exact = complex(dense_trace(matrix, query, settings.solvers.dense_order_cap))
            else:
                inverse = dense_lu_inverse(matrix, settings.solvers.dense_order_cap)
                for element in report.element_results:
                    exact_entry = complex(inverse[element.row, element.col])
                    element.exact_real, element.exact_imag = exact_entry.real, exact_entry.imag
                exact = complex(report.element_results[0].exact)
            report.exact_real, report.exact_imag = exact.real, exact.imag
        else:
            logger.warning(f"Order {matrix.order} above the dense cap; exact value skipped")

    report.timings.total_seconds = time.perf_counter() - started
    if config.dump_series_path:
        first = estimates[0]
        dump_series_csv(first.samples, config.dump_series_path, first_cycle=first.burn_in_cycles + 1)
        logger.info(f"Sample series written to {config.dump_series_path}")

    logger.info(
        f"{config.method.value.upper()} estimate {format_scalar(report.estimate, 10)} "
        f"± {report.mc_std_error:.3g} (N={report.burn_in_cycles}, M-N={report.sampling_cycles}, "
        f"ESS={report.effective_length:.1f}, converged={report.converged})"
    )
    return report


def run_experiment(config: ExperimentConfig, settings: Optional[Settings] = None) -> RunReport:
    """
    Run one experiment end to end.

    Raises:
        ConvergenceGateError: precheck failed and ``force`` is not set
        InversionError: any failure of the chosen method
    """
    return asyncio.run(run_experiment_async(config, settings))


# -------------------------------------------------------------- comparison


@dataclass
class ComparisonTable:
    a: RunReport
    b: RunReport
    z_score: float
    cpu_ratio: float
    titles: tuple = ("A", "B")

    def render(self) -> str:
        table = render_report_table([self.a, self.b], list(self.titles))
        return "\n".join([
            table,
            "",
            f"|A - B| / sqrt(eA^2 + eB^2) = {self.z_score:.3f}",
            f"total time B / A           = {self.cpu_ratio:.3f}",
        ])


def _ratio(num: float, den: float) -> float:
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


def compare(report_a: RunReport, report_b: RunReport, titles: tuple = ("A", "B")) -> ComparisonTable:
    """
    Compare two runs on the same target.

    Raises:
        MismatchedTargetsError: different matrix fingerprints or queries
    """
    if report_a.matrix_fingerprint != report_b.matrix_fingerprint or report_a.query != report_b.query:
        raise MismatchedTargetsError(
            "reports estimate different targets",
            a=(report_a.matrix_fingerprint, report_a.query),
            b=(report_b.matrix_fingerprint, report_b.query),
        )
    gap = abs(report_a.estimate - report_b.estimate)
    scale = math.hypot(report_a.mc_std_error, report_b.mc_std_error)
    return ComparisonTable(
        a=report_a,
        b=report_b,
        z_score=_ratio(gap, scale) if gap else 0.0,
        cpu_ratio=_ratio(report_b.timings.total_seconds, report_a.timings.total_seconds),
        titles=titles,
    )
