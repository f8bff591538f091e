"""
Simulated animal pedigrees for the Wu-Schaeffer test problem.
"""
from dataclasses import dataclass

import numpy as np
from loguru import logger

from app.core.exceptions import PedigreeError

UNKNOWN = -1


@dataclass
class Pedigree:
    """Animals 0..n-1 in birth order; ``sire``/``dam`` hold -1 for unknown parents"""
    sire: np.ndarray
    dam: np.ndarray
    herd: np.ndarray
    n_herds: int

    @property
    def n_animals(self) -> int:
        return int(self.sire.size)

    def known_parents(self) -> np.ndarray:
        """Number of known parents (0, 1 or 2) per animal"""
        return (self.sire >= 0).astype(np.int64) + (self.dam >= 0).astype(np.int64)

    def herd_sizes(self) -> np.ndarray:
        return np.bincount(self.herd, minlength=self.n_herds)

    def validate(self) -> None:
        """
        Raises:
            PedigreeError: ragged arrays, a parent not preceding its offspring
                or a herd label outside [0, n_herds)
        """
        n = self.n_animals
        if not (self.dam.size == self.herd.size == n):
            raise PedigreeError("sire, dam and herd arrays differ in length")
        own = np.arange(n)
        for name, parents in (("sire", self.sire), ("dam", self.dam)):
            bad = np.flatnonzero((parents < UNKNOWN) | (parents >= own))
            if bad.size:
                i = int(bad[0])
                raise PedigreeError(f"{name} {int(parents[i])} of animal {i} does not precede it", animal=i)
        if self.n_herds < 1 or np.any((self.herd < 0) | (self.herd >= self.n_herds)):
            raise PedigreeError(f"herd labels must lie in [0, {self.n_herds})")


def simulate_pedigree(
    n_animals: int,
    n_herds: int,
    generations: int,
    seed: int,
    unknown_parent_fraction: float = 0.1,
) -> Pedigree:
    """
    Simulate a discrete-generation pedigree.

    Animals are split into ``generations`` consecutive groups; generation 0 are
    founders. Every later animal draws its sire among the even positions and
    its dam among the odd positions of the previous generation, after which
    each parent is independently set unknown with ``unknown_parent_fraction``.
    Herds are assigned so that none is empty.

    Args:
        n_animals: pedigree size
        n_herds: number of herd levels, at most ``n_animals``
        generations: number of generations, at most ``n_animals``
        seed: random seed; the pedigree is a function of it
        unknown_parent_fraction: probability of each parent being unknown

    Returns:
        Pedigree: validated pedigree
    """
    if n_herds < 1:
        raise PedigreeError(f"need at least one herd, got {n_herds}")
    if n_animals < n_herds:
        raise PedigreeError(f"{n_animals} animals cannot fill {n_herds} herds")
    if generations < 1 or generations > n_animals:
        raise PedigreeError(f"generations must lie in [1, {n_animals}], got {generations}")
    if not 0.0 <= unknown_parent_fraction <= 1.0:
        raise PedigreeError(f"unknown parent fraction {unknown_parent_fraction} outside [0, 1]")

    rng = np.random.default_rng(seed)
    sire = np.full(n_animals, UNKNOWN, dtype=np.int64)
    dam = np.full(n_animals, UNKNOWN, dtype=np.int64)

    groups = np.array_split(np.arange(n_animals), generations)
    for previous, current in zip(groups[:-1], groups[1:]):
        sires, dams = previous[0::2], previous[1::2]
        sire[current] = rng.choice(sires, size=current.size)
        if dams.size:
            dam[current] = rng.choice(dams, size=current.size)
        sire[current[rng.random(current.size) < unknown_parent_fraction]] = UNKNOWN
        dam[current[rng.random(current.size) < unknown_parent_fraction]] = UNKNOWN

    herd = np.empty(n_animals, dtype=np.int64)
    order = rng.permutation(n_animals)
    herd[order[:n_herds]] = np.arange(n_herds)
    herd[order[n_herds:]] = rng.integers(0, n_herds, size=n_animals - n_herds)

    pedigree = Pedigree(sire=sire, dam=dam, herd=herd, n_herds=n_herds)
    pedigree.validate()
    logger.debug(
        f"Simulated pedigree: {n_animals} animals, {n_herds} herds, {generations} generations, "
        f"{int(np.sum(pedigree.known_parents() == 2))} with both parents known"
    )
    return pedigree
