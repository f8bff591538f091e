"""
Wu-Schaeffer mixed-model coefficient matrix.

A~^-1 generalizes Henderson's inverse relationship matrix with a parameter
lambda; for lambda > 0 it is not symmetric, which is what makes the problem a
test for non-hermitian inversion.
"""
import numpy as np
import scipy.sparse as sp
from loguru import logger

from app.core.exceptions import EmptyHerdError
from app.models.generators import AtildeRule, MixedModelSpec
from app.services.generators.pedigree import Pedigree
from app.services.sparse_matrix import ScalarKind, SparseMatrix

# delta by number of known parents: none, one, both
_DELTA = np.array([1.0, 4.0 / 3.0, 2.0])


def build_atilde_inverse(pedigree: Pedigree, lam: float = 0.2,
                         rule: AtildeRule = AtildeRule.HENDERSON) -> SparseMatrix:
    """
    Assemble A~^-1 animal by animal.

    For animal i with known parents p, q:
        (i, i) += (1 - lam) delta + lam
        (i, p) += -(1 - lam) delta / 2
        (p, i) += -delta / 2
        (p, q) += +-delta / 4   (p = q included; sign from ``rule``)
    """
    pedigree.validate()
    rule = AtildeRule(rule)
    n = pedigree.n_animals
    own = np.arange(n)
    delta = _DELTA[pedigree.known_parents()]
    pair_sign = 1.0 if rule is AtildeRule.HENDERSON else -1.0

    rows = [own]
    cols = [own]
    values = [(1.0 - lam) * delta + lam]
    parents = (pedigree.sire, pedigree.dam)
    for p in parents:
        known = p >= 0
        rows += [own[known], p[known]]
        cols += [p[known], own[known]]
        values += [-(1.0 - lam) * delta[known] / 2.0, -delta[known] / 2.0]
    for p in parents:
        for q in parents:
            both = (p >= 0) & (q >= 0)
            rows.append(p[both])
            cols.append(q[both])
            values.append(pair_sign * delta[both] / 4.0)

    return SparseMatrix.from_arrays(
        n, np.concatenate(rows), np.concatenate(cols), np.concatenate(values), ScalarKind.REAL
    )


def build_mixed_model_matrix(pedigree: Pedigree, spec: MixedModelSpec = MixedModelSpec()) -> SparseMatrix:
    """
    Coefficient matrix [[X'X, X'], [X, I + ratio A~^-1]] with herd effects first.

    X is the animal-by-herd incidence matrix, one record per animal.

    Raises:
        EmptyHerdError: a herd without animals (X'X singular)
    """
    pedigree.validate()
    sizes = pedigree.herd_sizes()
    empty = np.flatnonzero(sizes == 0)
    if empty.size:
        raise EmptyHerdError(f"herd {int(empty[0])} has no animals", herd=int(empty[0]))

    n_a, n_h = pedigree.n_animals, pedigree.n_herds
    incidence = sp.csr_matrix((np.ones(n_a), (np.arange(n_a), pedigree.herd)), shape=(n_a, n_h))
    atilde = build_atilde_inverse(pedigree, spec.lam, spec.rule).csr
    lhs = sp.bmat([
        [sp.diags(sizes.astype(np.float64)), incidence.T],
        [incidence, sp.identity(n_a, format="csr") + spec.ratio * atilde],
    ], format="coo")

    matrix = SparseMatrix.from_scipy(lhs, ScalarKind.REAL)
    logger.info(f"Built mixed-model matrix: {n_h} herds + {n_a} animals, nnz={matrix.nnz}, lambda={spec.lam}")
    return matrix
