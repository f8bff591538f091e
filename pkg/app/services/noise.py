"""
Shared noise vectors Phi^(k).

Each draw is keyed by (seed, k) through a counter-based Philox generator, so
any cycle can be regenerated exactly: the z-sweep, the w-sweep and all four
coupled burn-in chains see the same vector without buffering it.
"""
import numpy as np

from app.models.sampling import NoiseFamily, NoiseSpec

_COUNTER_STRIDE = 1 << 128  # blocks available to a single cycle


def _generator(seed: int, k: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=(k % (1 << 128)) * _COUNTER_STRIDE))


def draw(spec: NoiseSpec, k: int) -> np.ndarray:
    """Noise vector of cycle ``k``: mean 0, unit variance, real valued.

    Args:
        spec: family, seed and dimension
        k: cycle index

    Returns:
        np.ndarray: float64 vector of length ``spec.dimension``
    """
    rng = _generator(spec.seed, k)
    if spec.family is NoiseFamily.Z2:
        # phi = 2B - 1, B ~ Bernoulli(1/2)
        return 2.0 * rng.integers(0, 2, size=spec.dimension).astype(np.float64) - 1.0
    return rng.standard_normal(spec.dimension)
