"""
Run report models

Field names are part of the JSON schema consumed by ``mcinv report`` and
``mcinv compare``; rename only with a schema bump.
"""
import math
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from app.core.exceptions import ReportIOError
from app.utils.helpers import ensure_parent_dir

REPORT_SCHEMA_VERSION = 1


class Method(str, Enum):
    """Inversion method"""
    CC = "cc"          # correlated chains
    GS = "gs"          # Gibbs sampler, hermitian matrices only
    SE = "se"          # stochastic estimation through repeated solves
    ORACLE = "oracle"  # dense LU


class TimingReport(BaseModel):
    """Wall-clock timings in seconds plus ratios to a baseline cycle time"""
    burn_in_seconds: float = 0.0
    sampling_seconds: float = 0.0
    total_seconds: float = 0.0
    cpu_seconds: float = 0.0
    seconds_per_burn_in_cycle: Optional[float] = None
    seconds_per_cycle: Optional[float] = None
    seconds_per_effective_cycle: Optional[float] = None
    seconds_per_round: Optional[float] = None
    seconds_per_system: Optional[float] = None
    baseline_seconds_per_cycle: Optional[float] = None
    normalized: Dict[str, float] = Field(default_factory=dict)

    def normalize(self, baseline_seconds_per_cycle: Optional[float]) -> None:
        """Express every timing as a multiple of the baseline time per cycle"""
        baseline = baseline_seconds_per_cycle or self.seconds_per_cycle or self.seconds_per_system
        if not baseline:
            return
        self.baseline_seconds_per_cycle = baseline
        self.normalized = {
            name: value / baseline
            for name, value in (
                ("burn_in_cycle", self.seconds_per_burn_in_cycle),
                ("cycle", self.seconds_per_cycle),
                ("effective_cycle", self.seconds_per_effective_cycle),
                ("round", self.seconds_per_round),
                ("system", self.seconds_per_system),
                ("total", self.total_seconds),
            )
            if value is not None
        }


class ReplicateResult(BaseModel):
    seed: int
    estimate_real: float
    estimate_imag: float = 0.0
    mc_std_error: float
    effective_length: float
    burn_in_cycles: int = 0
    total_cycles: int = 0


class ElementResult(BaseModel):
    """One estimated entry (row, col) of C^-1, merged over replicates"""
    row: int
    col: int
    estimate_real: float
    estimate_imag: float = 0.0
    mc_std_error: float
    effective_length: float
    exact_real: Optional[float] = None
    exact_imag: Optional[float] = None

    @property
    def estimate(self) -> complex:
        return complex(self.estimate_real, self.estimate_imag)

    @property
    def exact(self) -> Optional[complex]:
        if self.exact_real is None:
            return None
        return complex(self.exact_real, self.exact_imag or 0.0)


class RunReport(BaseModel):
    """Everything one experiment produces.

    Element runs put every entry in ``element_results``; the top-level
    estimate, cycle counts and exact value are those of the first entry.
    """
    schema_version: int = REPORT_SCHEMA_VERSION
    method: Method
    created_at: str = ""

    # target
    matrix_source: str
    matrix_fingerprint: str
    order: int
    nnz: int
    scalar_kind: str
    query: str = "identity"
    boundary_conditions: Optional[str] = None

    # randomness
    seed: Optional[int] = None
    noise_family: Optional[str] = None

    # chain lengths
    burn_in_cycles: int = 0
    sampling_cycles: int = 0
    total_cycles: int = 0
    effective_length: float = 0.0

    # estimate and error bars
    estimate_real: float
    estimate_imag: float = 0.0
    sample_variance: float = 0.0
    mc_std_error: float = 0.0
    empirical_std_error: Optional[float] = None
    geyer_mean_std_error: Optional[float] = None
    converged: bool = True
    exact_real: Optional[float] = None
    exact_imag: Optional[float] = None

    # replicate study
    replicates: int = 1
    replicate_results: List[ReplicateResult] = Field(default_factory=list)

    # element runs
    element_results: List[ElementResult] = Field(default_factory=list)

    # precheck
    spectral_radius_t: Optional[float] = None
    spectral_radius_s: Optional[float] = None

    # SE columns
    se_systems: Optional[int] = None
    se_total_rounds: Optional[int] = None
    se_rounds_per_system: Optional[float] = None

    timings: TimingReport = Field(default_factory=TimingReport)
    config: Dict[str, Any] = Field(default_factory=dict)

    @property
    def estimate(self) -> complex:
        return complex(self.estimate_real, self.estimate_imag)

    @property
    def exact(self) -> Optional[complex]:
        if self.exact_real is None:
            return None
        return complex(self.exact_real, self.exact_imag or 0.0)

    @property
    def z_score_vs_exact(self) -> Optional[float]:
        if self.exact is None:
            return None
        gap = abs(self.estimate - self.exact)
        if self.mc_std_error == 0:
            return 0.0 if gap == 0 else math.inf
        return gap / self.mc_std_error

    def save(self, path: str) -> None:
        try:
            ensure_parent_dir(path)
            with open(path, "w", encoding="utf-8") as f:
                f.write(self.model_dump_json(indent=2))
        except OSError as e:
            raise ReportIOError(f"cannot write report {path}: {e}", path=path)

    @classmethod
    def load(cls, path: str) -> "RunReport":
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.model_validate_json(f.read())
        except OSError as e:
            raise ReportIOError(f"cannot read report {path}: {e}", path=path)
        except ValueError as e:
            raise ReportIOError(f"{path} is not a valid run report: {e}", path=path)
