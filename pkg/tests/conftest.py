"""
Shared fixtures: small matrices, random diagonally dominant builders and a
settings file without a log sink.
"""
from typing import Callable

import numpy as np
import pytest
import scipy.sparse as sp
import yaml

from app.core.config import LoggingConfig, Settings
from app.services.sparse_matrix import ScalarKind, SparseMatrix, build, write_matrix_market


def dominant_matrix(n: int, seed: int, density: float = 0.2, complex_values: bool = False,
                    hermitian: bool = False, margin: float = 1.0) -> SparseMatrix:
    """Random sparse matrix, strictly dominant by rows and by columns (sp(T), sp(S) < 1)"""
    rng = np.random.default_rng(seed)
    off = sp.random(n, n, density=density, random_state=rng, format="coo",
                    data_rvs=lambda k: rng.uniform(-1.0, 1.0, k))
    values = off.data.astype(np.complex128)
    if complex_values:
        values = values + 1j * rng.uniform(-1.0, 1.0, off.data.size)
    mask = off.row != off.col
    rows, cols, values = off.row[mask], off.col[mask], values[mask]
    if hermitian:
        rows, cols, values = (np.concatenate([rows, cols]), np.concatenate([cols, rows]),
                              np.concatenate([values, np.conj(values)]))
    dense_off = sp.coo_matrix((values, (rows, cols)), shape=(n, n)).toarray()
    weight = np.maximum(np.abs(dense_off).sum(axis=1), np.abs(dense_off).sum(axis=0))
    diag = weight + margin + rng.uniform(0.0, 1.0, n)

    kind = ScalarKind.COMPLEX if complex_values else ScalarKind.REAL
    full = sp.coo_matrix(dense_off + np.diag(diag))
    data = full.data if complex_values else full.data.real
    return SparseMatrix.from_arrays(n, full.row, full.col, data, kind)


@pytest.fixture
def make_dominant() -> Callable[..., SparseMatrix]:
    return dominant_matrix


@pytest.fixture
def diag24() -> SparseMatrix:
    """diag(2, 4): tr(C^-1) = 0.75"""
    return build(2, [(0, 0, 2.0), (1, 1, 4.0)])


@pytest.fixture
def divergent4() -> SparseMatrix:
    """Symmetric 4x4 with weak diagonal: sp(T) > 1"""
    triplets = [(i, i, 1.0) for i in range(4)]
    triplets += [(i, i + 1, 3.0) for i in range(3)] + [(i + 1, i, 3.0) for i in range(3)]
    return build(4, triplets)


@pytest.fixture
def quiet_settings() -> Settings:
    return Settings(logging=LoggingConfig(file=None))


@pytest.fixture
def config_file(tmp_path) -> str:
    """YAML settings file with a small dense cap and no log file"""
    path = tmp_path / "config.yaml"
    data = {
        "sampler": {"check_every": 100},
        "noise": {"family": "z2", "seed": 7},
        "solvers": {"dense_order_cap": 2048},
        "experiment": {"replicates": 1, "jobs": 1},
        "logging": {"level": "INFO", "file": None},
    }
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


@pytest.fixture
def matrix_file(tmp_path, make_dominant) -> Callable[..., str]:
    """Write a matrix to a Matrix Market file and return its path"""

    def write(matrix: SparseMatrix = None, name: str = "c.mtx") -> str:
        matrix = matrix if matrix is not None else make_dominant(12, seed=3)
        path = str(tmp_path / name)
        write_matrix_market(matrix, path)
        return path

    return write
