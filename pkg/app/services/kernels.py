"""
Compiled forward-sweep kernel.

A single Gauss-Seidel style sweep over a CSR matrix drives every iterative
scheme in the package: the CC z-sweep (rows of C), the CC w-sweep (rows of
C^H), the Gauss-Seidel solver and the power iteration for T and S^H.
"""
from dataclasses import dataclass

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def forward_sweep(indptr, indices, data, diag, noise_div, x, rhs):
    """x_i <- rhs_i / noise_div_i - (sum_{j != i} a_ij x_j) / diag_i, for i = 0..n-1 in order.

    Components j < i have already been overwritten in this sweep.
    """
    n = x.shape[0]
    for i in range(n):
        acc = x[i] * 0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if j != i:
                acc += data[p] * x[j]
        x[i] = rhs[i] / noise_div[i] - acc / diag[i]


@dataclass(frozen=True)
class SweepOperator:
    """Arrays consumed by :func:`forward_sweep`"""
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    diag: np.ndarray
    noise_div: np.ndarray

    @property
    def order(self) -> int:
        return self.diag.shape[0]

    @property
    def dtype(self) -> np.dtype:
        """Smallest dtype able to hold iterates driven by real right-hand sides"""
        return np.result_type(self.data.dtype, self.diag.dtype, self.noise_div.dtype, np.float64)

    def apply(self, x: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        """Run one in-place sweep on ``x``"""
        if x.shape != (self.order,) or rhs.shape != (self.order,):
            raise ValueError(f"sweep expects vectors of length {self.order}")
        if np.result_type(x.dtype, self.dtype, rhs.dtype) != x.dtype:
            raise TypeError(f"iterate dtype {x.dtype} cannot hold sweep results of dtype {self.dtype}")
        forward_sweep(self.indptr, self.indices, self.data, self.diag, self.noise_div, x, rhs)
        return x
