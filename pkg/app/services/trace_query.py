"""
Weighting matrix Q of tr(Q C^-1).
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from app.core.exceptions import ConfigError, DimensionMismatchError
from app.services.sparse_matrix import SparseMatrix, read_matrix_market
from app.utils.helpers import load_index_file


class QueryKind(str, Enum):
    IDENTITY = "identity"
    DIAGONAL = "diagonal"  # indicator over an index subset
    GENERAL = "general"


@dataclass(frozen=True, eq=False)
class TraceQuery:
    kind: QueryKind = QueryKind.IDENTITY
    indices: Optional[np.ndarray] = None
    matrix: Optional[SparseMatrix] = None
    label: str = "identity"

    @classmethod
    def identity(cls) -> "TraceQuery":
        return cls()

    @classmethod
    def diagonal(cls, indices, label: Optional[str] = None) -> "TraceQuery":
        indices = np.unique(np.asarray(indices, dtype=np.int64))
        if indices.size == 0:
            raise ConfigError("diagonal trace query needs at least one index")
        return cls(QueryKind.DIAGONAL, indices=indices, label=label or f"diag:{indices.tolist()}")

    @classmethod
    def general(cls, matrix: SparseMatrix, label: str = "general") -> "TraceQuery":
        return cls(QueryKind.GENERAL, matrix=matrix, label=label)

    @classmethod
    def parse(cls, text: str, order: int) -> "TraceQuery":
        """Parse ``identity``, ``diag:<index-file>`` or ``mm:<matrix-market-file>``"""
        text = (text or "identity").strip()
        if text == "identity":
            query = cls.identity()
        elif text.startswith("diag:"):
            query = cls.diagonal(load_index_file(text[5:], order), label=text)
        elif text.startswith("mm:"):
            query = cls.general(read_matrix_market(text[3:]), label=text)
        else:
            raise ConfigError(f"unknown trace query {text!r}; use identity, diag:<file> or mm:<file>")
        query.validate_for(order)
        return query

    def validate_for(self, order: int) -> None:
        if self.kind is QueryKind.DIAGONAL and (self.indices[0] < 0 or self.indices[-1] >= order):
            raise ConfigError(f"diagonal query indices fall outside [0, {order})")
        if self.kind is QueryKind.GENERAL and self.matrix.order != order:
            raise DimensionMismatchError(
                f"Q has order {self.matrix.order}, C has order {order}", expected=order, got=self.matrix.order
            )

    def quadratic(self, z: np.ndarray, w: np.ndarray):
        """z^H Q w"""
        if self.kind is QueryKind.IDENTITY:
            return np.vdot(z, w)
        if self.kind is QueryKind.DIAGONAL:
            return np.vdot(z[self.indices], w[self.indices])
        return np.vdot(z, self.matrix.matvec(w))

    def dense_trace(self, inverse: np.ndarray):
        """tr(Q C^-1) from a dense inverse"""
        if self.kind is QueryKind.IDENTITY:
            return np.trace(inverse)
        if self.kind is QueryKind.DIAGONAL:
            return np.sum(inverse[self.indices, self.indices])
        # tr(Q B) = sum_ij q_ij b_ji
        return self.matrix.csr.multiply(inverse.T).sum()

    def describe(self) -> str:
        return self.label
