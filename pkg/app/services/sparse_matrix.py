"""
Scalar-generic sparse square matrices.

Entries live in a sorted scipy CSR. A companion CSR of the conjugate
transpose gives the adjoint rows (c*_ji for fixed i) that the w-sweep reads,
and a dense array holds the diagonal.
"""
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np
import scipy.io
import scipy.sparse as sp
from loguru import logger

from app.core.exceptions import (
    DimensionMismatchError,
    MatrixBuildError,
    MatrixFormatError,
    ScalarKindError,
    ZeroDiagonalError,
)
from app.services.kernels import SweepOperator
from app.utils.helpers import calculate_array_hash, ensure_parent_dir

Scalar = Union[float, complex]
Triplet = Tuple[int, int, Scalar]


class ScalarKind(str, Enum):
    """Scalar tag fixed at construction"""
    REAL = "real"
    COMPLEX = "complex"


class SweepMode(str, Enum):
    NOISE = "noise"  # right-hand side divided by sqrt(c_ii): CC / GS sampling
    SOLVE = "solve"  # right-hand side divided by c_ii: Gauss-Seidel solve


def _principal_sqrt(diag: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(diag):
        return np.sqrt(diag)
    if np.any(diag < 0):
        return np.sqrt(diag.astype(np.complex128))
    return np.sqrt(diag)


class SparseMatrix:
    """Immutable square sparse matrix with row and adjoint-row access"""

    def __init__(self, csr: sp.csr_matrix, kind: ScalarKind):
        csr.sort_indices()
        self._csr = csr
        self.kind = kind
        self.order: int = csr.shape[0]

        adjoint = csr.conj().transpose().tocsr()
        adjoint.sort_indices()
        self._adjoint = adjoint

        self._diag = np.asarray(csr.diagonal())
        self.zero_diagonal: np.ndarray = np.flatnonzero(self._diag == 0)
        self._sweep_cache: Dict[Tuple[SweepMode, bool], SweepOperator] = {}

    # ------------------------------------------------------------------ build

    @classmethod
    def from_arrays(
        cls,
        n: int,
        rows: Iterable[int],
        cols: Iterable[int],
        values: Iterable[Scalar],
        kind: Optional[ScalarKind] = None,
    ) -> "SparseMatrix":
        """Assemble from coordinate arrays; duplicates are summed, explicit zeros kept.

        Raises:
            MatrixBuildError: n < 1, ragged arrays or an index outside [0, n)
            ScalarKindError: complex values under an explicit real tag
        """
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise MatrixBuildError(f"matrix order must be a positive integer, got {n!r}")
        n = int(n)

        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values).ravel()
        if not (rows.size == cols.size == values.size):
            raise MatrixBuildError("row, column and value arrays differ in length")
        if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
            bad = np.flatnonzero((rows < 0) | (rows >= n) | (cols < 0) | (cols >= n))[0]
            raise MatrixBuildError(
                f"entry ({rows[bad]}, {cols[bad]}) outside a {n}x{n} matrix", row=int(rows[bad]), col=int(cols[bad])
            )

        if kind is None:
            kind = ScalarKind.COMPLEX if np.iscomplexobj(values) else ScalarKind.REAL
        kind = ScalarKind(kind)
        if kind is ScalarKind.REAL and np.iscomplexobj(values):
            raise ScalarKindError("complex values given to a matrix tagged real")
        dtype = np.complex128 if kind is ScalarKind.COMPLEX else np.float64

        coo = sp.coo_matrix((values.astype(dtype), (rows, cols)), shape=(n, n))
        csr = coo.tocsr()
        csr.sum_duplicates()
        return cls(csr, kind)

    @classmethod
    def from_scipy(cls, matrix: sp.spmatrix, kind: Optional[ScalarKind] = None) -> "SparseMatrix":
        coo = sp.coo_matrix(matrix)
        if coo.shape[0] != coo.shape[1]:
            raise MatrixBuildError(f"matrix is not square: {coo.shape}")
        return cls.from_arrays(coo.shape[0], coo.row, coo.col, coo.data, kind)

    # ------------------------------------------------------------ properties

    @property
    def csr(self) -> sp.csr_matrix:
        """Row-major storage of C (treat as read-only)"""
        return self._csr

    @property
    def adjoint(self) -> sp.csr_matrix:
        """Row-major storage of C^H, i.e. the adjoint rows of C (read-only)"""
        return self._adjoint

    @property
    def diag(self) -> np.ndarray:
        return self._diag

    @property
    def nnz(self) -> int:
        return int(self._csr.nnz)

    @property
    def dtype(self) -> np.dtype:
        return self._csr.dtype

    @property
    def is_complex(self) -> bool:
        return self.kind is ScalarKind.COMPLEX

    def __repr__(self) -> str:
        return f"SparseMatrix(order={self.order}, nnz={self.nnz}, kind={self.kind.value})"

    # ------------------------------------------------------------ operations

    def split(self) -> Tuple[sp.csr_matrix, np.ndarray, sp.csr_matrix]:
        """Return (L, D, U): strict lower part, diagonal vector, strict upper part"""
        lower = sp.tril(self._csr, k=-1, format="csr")
        upper = sp.triu(self._csr, k=1, format="csr")
        return lower, self._diag.copy(), upper

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = self.check_vector(x)
        return self._csr @ x

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        """C^H x through the adjoint rows"""
        x = self.check_vector(x)
        return self._adjoint @ x

    def row(self, i: int) -> Iterator[Tuple[int, Scalar]]:
        self._check_index(i)
        start, stop = self._csr.indptr[i], self._csr.indptr[i + 1]
        for j, v in zip(self._csr.indices[start:stop], self._csr.data[start:stop]):
            yield int(j), v

    def adjoint_row(self, i: int) -> Iterator[Tuple[int, Scalar]]:
        """Yield (j, conj(a_ji)): row i of C^H"""
        self._check_index(i)
        start, stop = self._adjoint.indptr[i], self._adjoint.indptr[i + 1]
        for j, v in zip(self._adjoint.indices[start:stop], self._adjoint.data[start:stop]):
            yield int(j), v

    def triplets(self) -> List[Triplet]:
        coo = self._csr.tocoo()
        return [(int(r), int(c), v) for r, c, v in zip(coo.row, coo.col, coo.data)]

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def is_hermitian(self, rtol: float = 0.0) -> bool:
        if np.any(np.imag(self._diag) != 0):
            return False
        diff = self._csr - self._adjoint
        if diff.nnz == 0:
            return True
        gap = np.max(np.abs(diff.data))
        scale = np.max(np.abs(self._csr.data)) if self.nnz else 0.0
        return bool(gap <= rtol * scale)

    def fingerprint(self) -> str:
        """Content hash over structure and values"""
        return calculate_array_hash(
            [self._csr.indptr, self._csr.indices, self._csr.data],
            prefix=f"{self.order}:{self.kind.value}",
        )

    def require_nonzero_diagonal(self) -> None:
        if self.zero_diagonal.size:
            raise ZeroDiagonalError(int(self.zero_diagonal[0]))

    def sweep_operator(self, mode: SweepMode = SweepMode.NOISE, adjoint: bool = False) -> SweepOperator:
        """Kernel arrays for sweeps over the rows of C (or of C^H when ``adjoint``).

        In NOISE mode the right-hand side is divided by sqrt(c_ii), or by its
        conjugate for the adjoint sweep, principal branch in both cases.

        Raises:
            ZeroDiagonalError: some c_ii is zero
        """
        key = (SweepMode(mode), bool(adjoint))
        if key not in self._sweep_cache:
            self.require_nonzero_diagonal()
            base = self._adjoint if adjoint else self._csr
            diag = np.conj(self._diag) if adjoint else self._diag
            if key[0] is SweepMode.NOISE:
                root = _principal_sqrt(self._diag)
                noise_div = np.conj(root) if adjoint else root
            else:
                noise_div = diag
            self._sweep_cache[key] = SweepOperator(
                indptr=base.indptr,
                indices=base.indices,
                data=base.data,
                diag=np.ascontiguousarray(diag),
                noise_div=np.ascontiguousarray(noise_div),
            )
        return self._sweep_cache[key]

    # ---------------------------------------------------------------- helpers

    def check_vector(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.order,):
            raise DimensionMismatchError(
                f"vector of shape {x.shape} does not match matrix order {self.order}",
                expected=self.order, got=list(x.shape),
            )
        return x

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.order:
            raise IndexError(f"row index {i} outside [0, {self.order})")


def build(n: int, triplets: Iterable[Triplet], kind: Optional[ScalarKind] = None) -> SparseMatrix:
    """Build a matrix from (row, col, value) triplets"""
    triplets = list(triplets)
    if triplets:
        rows, cols, values = zip(*triplets)
    else:
        rows, cols, values = (), (), ()
    values = np.array(values) if values else np.zeros(0)
    return SparseMatrix.from_arrays(n, rows, cols, values, kind)


def matvec(matrix: SparseMatrix, x: np.ndarray) -> np.ndarray:
    return matrix.matvec(x)


def adjoint_row(matrix: SparseMatrix, i: int) -> Iterator[Tuple[int, Scalar]]:
    return matrix.adjoint_row(i)


def read_matrix_market(path: str) -> SparseMatrix:
    """
    Read a coordinate Matrix Market file (1-based on disk).

    Symmetric and hermitian files are expanded to the full matrix.

    Raises:
        MatrixFormatError: unreadable file, malformed header, array format,
            inconsistent dimensions or a non-square matrix
    """
    try:
        rows, cols, _entries, fmt, field, symmetry = scipy.io.mminfo(path)
    except (OSError, ValueError) as e:
        raise MatrixFormatError(f"cannot read Matrix Market header of {path}: {e}", path=path)

    if fmt != "coordinate":
        raise MatrixFormatError(f"{path}: only coordinate format is supported, got {fmt}", path=path)
    if field not in ("real", "integer", "complex", "double"):
        raise MatrixFormatError(f"{path}: unsupported field {field}", path=path)
    if rows != cols:
        raise MatrixFormatError(f"{path}: matrix is not square ({rows}x{cols})", path=path)

    try:
        coo = sp.coo_matrix(scipy.io.mmread(path))
    except (OSError, ValueError, IndexError) as e:
        raise MatrixFormatError(f"{path}: inconsistent Matrix Market body: {e}", path=path)

    kind = ScalarKind.COMPLEX if field == "complex" else ScalarKind.REAL
    values = coo.data if kind is ScalarKind.COMPLEX else coo.data.astype(np.float64)
    try:
        matrix = SparseMatrix.from_arrays(int(rows), coo.row, coo.col, values, kind)
    except MatrixBuildError as e:
        raise MatrixFormatError(f"{path}: {e.message}", path=path)
    logger.debug(f"Read {path}: {matrix} ({symmetry})")
    return matrix


def write_matrix_market(matrix: SparseMatrix, path: str, comment: str = "") -> None:
    """Write with general symmetry and 17 significant digits"""
    ensure_parent_dir(path)
    coo = matrix.csr.tocoo()
    try:
        with open(path, "wb") as f:
            scipy.io.mmwrite(f, coo, comment=comment, field=matrix.kind.value, precision=17, symmetry="general")
    except OSError as e:
        raise MatrixFormatError(f"cannot write {path}: {e}", path=path)
    logger.debug(f"Wrote {matrix} to {path}")
