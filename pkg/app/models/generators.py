"""
测试矩阵生成参数模型
"""
from enum import Enum
from typing import Tuple

from pydantic import BaseModel, Field


class AtildeRule(str, Enum):
    """Sign of the parent-pair term of the A~^-1 update"""
    HENDERSON = "henderson"    # +delta/4: lambda = 0 is Henderson's A^-1
    AS_PRINTED = "as_printed"  # -delta/4


class GammaConvention(str, Enum):
    """Gamma-matrix set of the Wilson-Dirac operator"""
    DIRAC = "dirac"            # Euclidean Dirac representation
    AS_PRINTED = "as_printed"  # off-diagonal gamma^4, fails the Clifford relation


class MixedModelSpec(BaseModel):
    """Wu-Schaeffer mixed-model matrix parameters"""
    ratio: float = Field(3.0, gt=0)        # residual to genetic variance ratio
    lam: float = Field(0.2, ge=0, le=1)   # lambda = 0 gives a symmetric matrix
    rule: AtildeRule = AtildeRule.HENDERSON


class LatticeSpec(BaseModel):
    """Periodic 4-D lattice: extents n0 (time) and n1..n3 (space), each at least 2"""
    n0: int = 4
    n1: int = 4
    n2: int = 4
    n3: int = 4
    k: float = 0.1  # hopping parameter
    gamma_convention: GammaConvention = GammaConvention.DIRAC

    @classmethod
    def cubic(cls, extent: int, **kwargs) -> "LatticeSpec":
        return cls(n0=extent, n1=extent, n2=extent, n3=extent, **kwargs)

    @property
    def extents(self) -> Tuple[int, int, int, int]:
        return self.n0, self.n1, self.n2, self.n3

    @property
    def sites(self) -> int:
        return self.n0 * self.n1 * self.n2 * self.n3

    @property
    def order(self) -> int:
        return 4 * self.sites

    def describe(self) -> str:
        return f"dirac {self.n0}x{self.n1}x{self.n2}x{self.n3} K={self.k} ({self.gamma_convention.value})"
