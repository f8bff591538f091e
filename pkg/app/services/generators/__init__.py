"""
Test-matrix generators: Wu-Schaeffer mixed-model matrices and free
Wilson-Dirac matrices
"""
from app.services.generators.dirac import (
    StructureCounts,
    anticommutator_holds,
    build_dirac_matrix,
    dirac_exact_trace,
    dirac_structure_counts,
    gamma_matrices,
)
from app.services.generators.mixed_model import build_atilde_inverse, build_mixed_model_matrix
from app.services.generators.pedigree import Pedigree, simulate_pedigree

__all__ = [
    "Pedigree",
    "StructureCounts",
    "anticommutator_holds",
    "build_atilde_inverse",
    "build_dirac_matrix",
    "build_mixed_model_matrix",
    "dirac_exact_trace",
    "dirac_structure_counts",
    "gamma_matrices",
    "simulate_pedigree",
]
