"""
Sampling configuration models
"""
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import Settings


class NoiseFamily(str, Enum):
    """Distribution of the noise components"""
    Z2 = "z2"              # ±1 with equal probability
    GAUSSIAN = "gaussian"  # standard normal


class StartKind(str, Enum):
    ZEROS = "zeros"   # z_i = 0
    INDEX = "index"   # z_i = i + 1
    ONES = "ones"


class InnerSolver(str, Enum):
    BICG = "bicg"
    GAUSS_SEIDEL = "gs"


class NoiseSpec(BaseModel):
    """Noise stream: family, 64-bit seed and vector length"""
    model_config = ConfigDict(frozen=True)

    family: NoiseFamily = NoiseFamily.Z2
    seed: int = Field(0, ge=0, lt=2**64)
    dimension: int = Field(..., ge=1)

    def with_seed(self, seed: int) -> "NoiseSpec":
        return self.model_copy(update={"seed": seed % 2**64})


class BurnInConfig(BaseModel):
    """Coupled-chain burn-in settings"""
    tolerance: float = Field(5.0e-5, gt=0)
    max_cycles: int = Field(100000, ge=1)
    divergence_threshold: float = Field(1.0e12, gt=0)
    primary_start: StartKind = StartKind.ZEROS
    partner_start: StartKind = StartKind.INDEX

    @model_validator(mode="after")
    def _distinct_starts(self) -> "BurnInConfig":
        if self.primary_start == self.partner_start:
            raise ValueError("coupled chains need distinct starting values")
        return self

    @classmethod
    def from_settings(cls, settings: Settings) -> "BurnInConfig":
        return cls(
            tolerance=settings.sampler.burn_in_tolerance,
            max_cycles=settings.sampler.burn_in_max_cycles,
            divergence_threshold=settings.sampler.divergence_threshold,
        )


class StoppingRule(BaseModel):
    """Stop once the MC standard error falls below ``rel_tolerance`` times |estimate|"""
    rel_tolerance: float = Field(5.0e-5, gt=0)
    check_every: int = Field(100, ge=1)
    max_cycles: int = Field(1000000, ge=1)

    @classmethod
    def for_kind(cls, is_complex: bool, settings: Settings, rel_tolerance: Optional[float] = None,
                 max_cycles: Optional[int] = None) -> "StoppingRule":
        default_tol = settings.sampler.rel_tolerance_complex if is_complex else settings.sampler.rel_tolerance_real
        return cls(
            rel_tolerance=rel_tolerance if rel_tolerance is not None else default_tol,
            check_every=settings.sampler.check_every,
            max_cycles=max_cycles if max_cycles is not None else settings.sampler.max_cycles,
        )


class SeConfig(BaseModel):
    """Stochastic Estimation baseline settings"""
    inner_solver: InnerSolver = InnerSolver.BICG
    inner_tolerance: float = Field(5.0e-5, gt=0)
    inner_max_iter: int = Field(10000, ge=1)
    stop: StoppingRule = StoppingRule()
