"""
Experiment configuration models
"""
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, model_validator

from app.core.config import Settings
from app.core.exceptions import ConfigError
from app.models.generators import AtildeRule, LatticeSpec, MixedModelSpec
from app.models.report import Method
from app.models.sampling import BurnInConfig, NoiseFamily, SeConfig


class WuSchaefferSource(BaseModel):
    """Simulated pedigree plus mixed-model parameters"""
    n_animals: int = Field(200, ge=1)
    n_herds: int = Field(20, ge=1)
    generations: int = Field(4, ge=1)
    seed: int = Field(1, ge=0)
    unknown_parent_fraction: float = Field(0.1, ge=0, le=1)
    ratio: float = Field(3.0, gt=0)
    lam: float = Field(0.2, ge=0, le=1)
    rule: AtildeRule = AtildeRule.HENDERSON

    @property
    def mixed_model(self) -> MixedModelSpec:
        return MixedModelSpec(ratio=self.ratio, lam=self.lam, rule=self.rule)

    def describe(self) -> str:
        return (f"wu-schaeffer animals={self.n_animals} herds={self.n_herds} generations={self.generations} "
                f"lambda={self.lam} ratio={self.ratio} seed={self.seed}")


class ExperimentConfig(BaseModel):
    """One inversion experiment; exactly one matrix source must be set"""

    # matrix source
    matrix_path: Optional[str] = None
    wu_schaeffer: Optional[WuSchaefferSource] = None
    dirac: Optional[LatticeSpec] = None

    method: Method = Method.CC
    query: str = "identity"
    entries: Optional[List[Tuple[int, int]]] = None  # estimate these entries of C^-1 instead of a trace

    # randomness
    noise_family: NoiseFamily = NoiseFamily.Z2
    seed: int = Field(20240101, ge=0, lt=2**64)

    burn_in: BurnInConfig = BurnInConfig()
    rel_tolerance: Optional[float] = Field(None, gt=0)  # None: picked from the scalar kind
    max_cycles: Optional[int] = Field(None, ge=1)
    se: SeConfig = SeConfig()

    replicates: int = Field(1, ge=1)
    jobs: int = Field(1, ge=1)
    force: bool = False        # run even when the precheck fails
    with_exact: bool = False   # add the dense LU value when the order allows

    report_path: Optional[str] = None
    dump_series_path: Optional[str] = None
    baseline_report_path: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self) -> "ExperimentConfig":
        sources = [s for s in (self.matrix_path, self.wu_schaeffer, self.dirac) if s is not None]
        if len(sources) != 1:
            raise ValueError("exactly one of matrix_path, wu_schaeffer or dirac must be given")
        return self

    @model_validator(mode="after")
    def _entries_or_query(self) -> "ExperimentConfig":
        if self.entries is not None:
            if not self.entries:
                raise ValueError("entries must not be empty")
            if self.query != "identity":
                raise ValueError("entries and a trace query cannot be combined")
            if self.method is Method.ORACLE:
                raise ValueError("the oracle computes traces only")
        return self

    @classmethod
    def parse(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Validate a plain dict, reporting problems as ConfigError"""
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"invalid experiment configuration: {e}")

    @classmethod
    def from_settings(cls, settings: Settings, **overrides: Any) -> "ExperimentConfig":
        """Defaults from the YAML settings; explicit overrides win"""
        data: Dict[str, Any] = {
            "noise_family": settings.noise.family,
            "seed": settings.noise.seed,
            "burn_in": BurnInConfig.from_settings(settings).model_dump(),
            "se": {
                "inner_solver": settings.se.inner_solver,
                "inner_tolerance": settings.se.inner_tolerance,
                "inner_max_iter": settings.se.inner_max_iter,
            },
            "replicates": settings.experiment.replicates,
            "jobs": settings.experiment.jobs,
        }
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.parse(data)

    def source_label(self) -> str:
        if self.matrix_path is not None:
            return self.matrix_path
        if self.wu_schaeffer is not None:
            return self.wu_schaeffer.describe()
        return self.dirac.describe()
