"""
Free Wilson-Dirac matrix on a periodic 4-D lattice.

    L = 1 + K sum_mu [ (1 + gamma^mu) delta_{x+mu, y} + (1 - gamma^mu) delta_{x-mu, y} ]

Rows and columns are indexed m = a + N1 (b + N2 (c + N3 (d + N0 mu))), 0-based,
where (a, b, c) are the space coordinates paired with gamma^1..gamma^3, d is
the time coordinate paired with gamma^4 and mu is the spinor index.
"""
from typing import NamedTuple, Tuple

import numpy as np
from loguru import logger

from app.core.exceptions import LatticeError, OrderCapExceededError
from app.models.generators import GammaConvention, LatticeSpec
from app.services.iter_solvers import DEFAULT_ORDER_CAP, dense_trace
from app.services.sparse_matrix import ScalarKind, SparseMatrix

_I2 = np.eye(2, dtype=np.complex128)
_Z2 = np.zeros((2, 2), dtype=np.complex128)
_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)


class StructureCounts(NamedTuple):
    order: int
    nnz: int
    row_counts: Tuple[int, int, int, int]  # stored entries per row, by spinor index


def gamma_matrices(convention: GammaConvention = GammaConvention.DIRAC) -> np.ndarray:
    """gamma^1..gamma^4 stacked into a (4, 4, 4) complex array.

    ``DIRAC`` is the Euclidean Dirac representation and satisfies
    {gamma^mu, gamma^nu} = 2 delta^{mu nu}. ``AS_PRINTED`` keeps an
    off-diagonal gamma^4 and sigma^2 = [[0, -i], [-i, 0]]; it does not.
    """
    convention = GammaConvention(convention)
    if convention is GammaConvention.DIRAC:
        spatial = [np.block([[_Z2, -1j * s], [1j * s, _Z2]]) for s in _PAULI]
        temporal = np.diag([1, 1, -1, -1]).astype(np.complex128)
    else:
        sigmas = (_PAULI[0], np.array([[0, -1j], [-1j, 0]], dtype=np.complex128), _PAULI[2])
        spatial = [np.block([[_Z2, s], [s, _Z2]]) for s in sigmas]
        temporal = np.block([[_Z2, _I2], [_I2, _Z2]])
    return np.stack(spatial + [temporal])


def anticommutator_holds(gammas: np.ndarray, atol: float = 1e-12) -> bool:
    """Check {gamma^mu, gamma^nu} = 2 delta^{mu nu} I for every pair"""
    eye = np.eye(gammas.shape[-1])
    for mu in range(gammas.shape[0]):
        for nu in range(gammas.shape[0]):
            anti = gammas[mu] @ gammas[nu] + gammas[nu] @ gammas[mu]
            if not np.allclose(anti, 2.0 * eye * (mu == nu), atol=atol):
                return False
    return True


def _check_lattice(spec: LatticeSpec) -> None:
    small = [n for n in spec.extents if n < 2]
    if small:
        raise LatticeError(f"lattice extents must be at least 2, got {spec.extents}", extents=list(spec.extents))


def _site_coordinates(spec: LatticeSpec):
    """(a, b, c, d) per site and the matching extents, in gamma^1..gamma^4 order"""
    n0, n1, n2, n3 = spec.extents
    site = np.arange(spec.sites)
    a = site % n1
    b = (site // n1) % n2
    c = (site // (n1 * n2)) % n3
    d = site // (n1 * n2 * n3)
    return (a, b, c, d), (n1, n2, n3, n0)


def _site_index(coords, extents) -> np.ndarray:
    a, b, c, d = coords
    n1, n2, n3, _ = extents
    return a + n1 * (b + n2 * (c + n3 * d))


def _hopping_blocks(gammas: np.ndarray, k: float):
    """(forward, backward) 4x4 blocks per direction: K (1 + gamma), K (1 - gamma)"""
    eye = np.eye(4)
    return [(k * (eye + g), k * (eye - g)) for g in gammas]


def build_dirac_matrix(spec: LatticeSpec) -> SparseMatrix:
    """
    Assemble L with periodic boundaries.

    Blocks are emitted entrywise with exact zeros skipped; at extent 2 the
    forward and backward neighbours coincide and their entries are summed,
    which can leave explicit zeros in the structure.

    Raises:
        LatticeError: an extent below 2
    """
    _check_lattice(spec)
    coords, extents = _site_coordinates(spec)
    sites = spec.sites
    here = np.arange(sites)

    rows = [np.arange(spec.order)]
    cols = [np.arange(spec.order)]
    values = [np.ones(spec.order, dtype=np.complex128)]

    gammas = gamma_matrices(spec.gamma_convention)
    for direction, blocks in enumerate(_hopping_blocks(gammas, spec.k)):
        for step, block in zip((1, -1), blocks):
            shifted = list(coords)
            shifted[direction] = (coords[direction] + step) % extents[direction]
            neighbour = _site_index(shifted, extents)
            for mu, nu in zip(*np.nonzero(block)):
                rows.append(here + sites * mu)
                cols.append(neighbour + sites * nu)
                values.append(np.full(sites, block[mu, nu]))

    matrix = SparseMatrix.from_arrays(
        spec.order, np.concatenate(rows), np.concatenate(cols), np.concatenate(values), ScalarKind.COMPLEX
    )
    logger.info(f"Built {spec.describe()}: order {matrix.order}, nnz {matrix.nnz}")
    return matrix


def dirac_structure_counts(spec: LatticeSpec) -> StructureCounts:
    """Order and stored-entry counts (K != 0) by index arithmetic, without assembling L.

    Every site has the same pattern, so a row's count depends only on its
    spinor index.
    """
    _check_lattice(spec)
    gammas = gamma_matrices(spec.gamma_convention)
    extents = (spec.n1, spec.n2, spec.n3, spec.n0)
    per_spinor = []
    for mu in range(4):
        count = 1
        for direction, (forward, backward) in enumerate(_hopping_blocks(gammas, 1.0)):
            ahead = set(np.flatnonzero(forward[mu]))
            behind = set(np.flatnonzero(backward[mu]))
            count += len(ahead | behind) if extents[direction] == 2 else len(ahead) + len(behind)
        per_spinor.append(count)
    return StructureCounts(order=spec.order, nnz=spec.sites * sum(per_spinor), row_counts=tuple(per_spinor))


def dirac_exact_trace(spec: LatticeSpec, cap: int = DEFAULT_ORDER_CAP) -> complex:
    """tr(L^-1) by dense LU.

    Raises:
        OrderCapExceededError: order above ``cap``
    """
    _check_lattice(spec)
    if spec.order > cap:
        raise OrderCapExceededError(f"dense oracle limited to order {cap}, got {spec.order}", order=spec.order, cap=cap)
    return complex(dense_trace(build_dirac_matrix(spec), cap=cap))
