__version__ = "1.0.0"
__author__ = "mcinv developers"
__description__ = "Correlated Chains Monte Carlo inversion of sparse matrices"
