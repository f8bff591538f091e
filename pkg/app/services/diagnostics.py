"""
Monte Carlo error machinery for serially correlated sample series.

Effective sample sizes follow Geyer's initial positive sequence: lag
autocorrelations are summed in consecutive pairs for as long as the pair sums
stay positive.
"""
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import InsufficientSamplesError, ReportIOError
from app.models.report import RunReport
from app.utils.helpers import ensure_parent_dir, format_scalar

MIN_SERIES_LENGTH = 10
MIN_IID_LENGTH = 2
ESS_CEILING = 1.5  # anti-correlated series may exceed their length, never by more than this factor


@dataclass(frozen=True)
class SeriesSummary:
    count: int
    mean: complex
    variance: float
    effective_length: float
    mc_std_error: float


def _as_series(series) -> np.ndarray:
    x = np.asarray(series)
    if x.ndim != 1:
        raise ValueError("sample series must be one-dimensional")
    return x


def _real_effective_length(x: np.ndarray) -> float:
    n = x.size
    centered = x - x.mean()
    gamma0 = np.dot(centered, centered) / n
    if gamma0 == 0:
        return float(n)

    def rho(lag: int) -> float:
        return np.dot(centered[: n - lag], centered[lag:]) / (n * gamma0)

    pair_sum = 1.0 + rho(1)
    m = 1
    while 2 * m + 1 < n:
        pair = rho(2 * m) + rho(2 * m + 1)
        if pair <= 0:
            break
        pair_sum += pair
        m += 1

    tau = 2.0 * pair_sum - 1.0
    if tau <= 0:
        return ESS_CEILING * n
    return float(min(n / tau, ESS_CEILING * n))


def _check_length(x: np.ndarray) -> None:
    if x.size < MIN_SERIES_LENGTH:
        raise InsufficientSamplesError(
            f"need at least {MIN_SERIES_LENGTH} samples, got {x.size}", count=int(x.size)
        )


def _part_variances(x: np.ndarray) -> List[Tuple[np.ndarray, float]]:
    parts = [x.real, x.imag] if np.iscomplexobj(x) else [x]
    return [(p, float(np.var(p, ddof=1))) for p in parts]


def summarize(series) -> SeriesSummary:
    """Mean, variance, Geyer effective length and MC error in one pass"""
    x = _as_series(series)
    _check_length(x)

    error_sq = 0.0
    variance = 0.0
    for part, var in _part_variances(x):
        variance += var
        if var > 0:
            error_sq += var / _real_effective_length(part)

    if variance == 0:
        ess = float(x.size)
    else:
        ess = variance / error_sq
    mean = x.mean()
    return SeriesSummary(
        count=int(x.size),
        mean=complex(mean) if np.iscomplexobj(x) else float(mean),
        variance=variance,
        effective_length=ess,
        mc_std_error=float(np.sqrt(error_sq)),
    )


def effective_length(series) -> float:
    """Geyer effective sample size.

    Complex series combine the parts so that ``mc_std_error`` equals
    sqrt(variance / effective_length) for them as well.

    Raises:
        InsufficientSamplesError: fewer than 10 samples
    """
    return summarize(series).effective_length


def mc_std_error(series) -> float:
    """sqrt(sample variance / effective length); real and imaginary parts add in quadrature"""
    return summarize(series).mc_std_error


def iid_summary(series) -> SeriesSummary:
    """Summary for independent samples: effective length is the count"""
    x = _as_series(series)
    if x.size < MIN_IID_LENGTH:
        raise InsufficientSamplesError(f"need at least {MIN_IID_LENGTH} samples, got {x.size}", count=int(x.size))
    variance = float(np.var(x, ddof=1))
    mean = x.mean()
    return SeriesSummary(
        count=int(x.size),
        mean=complex(mean) if np.iscomplexobj(x) else float(mean),
        variance=variance,
        effective_length=float(x.size),
        mc_std_error=float(np.sqrt(variance / x.size)),
    )


def empirical_std_error(replicate_estimates: Sequence) -> float:
    """Sample standard deviation of independent replicate estimates.

    Raises:
        InsufficientSamplesError: fewer than two replicates
    """
    x = np.asarray(replicate_estimates)
    if x.size < 2:
        raise InsufficientSamplesError(f"need at least 2 replicates, got {x.size}", count=int(x.size))
    return float(np.std(x, ddof=1))


def lag_autocorrelation(series, lag: int = 1) -> float:
    x = np.asarray(series)
    parts = [x.real, x.imag] if np.iscomplexobj(x) else [x]
    num = 0.0
    den = 0.0
    for p in parts:
        c = p - p.mean()
        num += np.dot(c[:-lag], c[lag:])
        den += np.dot(c, c)
    return float(num / den) if den > 0 else 0.0


def dump_series_csv(samples: np.ndarray, path: str, first_cycle: int = 1) -> None:
    """Write ``cycle,real,imag`` rows for external plotting"""
    samples = np.asarray(samples)
    cycles = np.arange(first_cycle, first_cycle + samples.size)
    table = np.column_stack([cycles, samples.real, np.imag(samples)])
    try:
        ensure_parent_dir(path)
        np.savetxt(path, table, delimiter=",", header="cycle,real,imag", comments="",
                   fmt=["%d", "%.17g", "%.17g"])
    except OSError as e:
        raise ReportIOError(f"cannot write series dump {path}: {e}", path=path)


# ---------------------------------------------------------------- rendering


def _seconds(report: RunReport, field: str, ratio_key: str) -> str:
    value = getattr(report.timings, field)
    if value is None:
        return "-"
    ratio = report.timings.normalized.get(ratio_key)
    return f"{value:.3g}s" if ratio is None else f"{value:.3g}s ({ratio:.3g})"


def _opt(value, fmt: str = "{}") -> str:
    return "-" if value is None else fmt.format(value)


_ROWS: List[Tuple[str, Callable[[RunReport], str]]] = [
    ("Method", lambda r: r.method.value.upper()),
    ("Rank of C", lambda r: str(r.order)),
    ("Nonzero elements", lambda r: str(r.nnz)),
    ("Q", lambda r: r.query),
    ("N", lambda r: str(r.burn_in_cycles) if r.method.value in ("cc", "gs") else "-"),
    ("M-N", lambda r: str(r.sampling_cycles) if r.method.value in ("cc", "gs") else "-"),
    ("Eff. length size", lambda r: f"{r.effective_length:.1f}" if r.method.value != "oracle" else "-"),
    ("Estimate", lambda r: format_scalar(r.estimate, 10)),
    ("Exact value", lambda r: "-" if r.exact is None else format_scalar(r.exact, 10)),
    ("Var", lambda r: f"{r.sample_variance:.6g}"),
    ("MC St. error", lambda r: f"{r.mc_std_error:.4g}"),
    ("Empirical St. error", lambda r: _opt(r.empirical_std_error, "{:.4g}")),
    ("Rounds per system", lambda r: _opt(r.se_rounds_per_system, "{:.2f}")),
    ("Total rounds", lambda r: _opt(r.se_total_rounds)),
    ("Number of systems", lambda r: _opt(r.se_systems)),
    ("CPU time per burn-in cycle", lambda r: _seconds(r, "seconds_per_burn_in_cycle", "burn_in_cycle")),
    ("CPU time per cycle", lambda r: _seconds(r, "seconds_per_cycle", "cycle")),
    ("CPU time per eff. cycle", lambda r: _seconds(r, "seconds_per_effective_cycle", "effective_cycle")),
    ("CPU time per round", lambda r: _seconds(r, "seconds_per_round", "round")),
    ("CPU time per system", lambda r: _seconds(r, "seconds_per_system", "system")),
    ("Total CPU time", lambda r: _seconds(r, "total_seconds", "total")),
]


def render_report_table(reports: Sequence[RunReport], titles: Optional[Sequence[str]] = None) -> str:
    """Text table with one column per report; time cells show seconds and the baseline ratio"""
    titles = list(titles) if titles else [f"#{i + 1}" for i in range(len(reports))]
    cells = [[label] + [render(r) for r in reports] for label, render in _ROWS]
    header = [""] + titles
    widths = [max(len(row[c]) for row in cells + [header]) for c in range(len(header))]

    def line(row: List[str]) -> str:
        return "  ".join(v.ljust(widths[0]) if i == 0 else v.rjust(widths[i]) for i, v in enumerate(row))

    out = [line(header), "  ".join("-" * w for w in widths)]
    out.extend(line(row) for row in cells)
    return "\n".join(out)
