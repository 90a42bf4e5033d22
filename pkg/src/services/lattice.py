"""Multi-headed lattices V_{M,N}: steps that move exactly M coordinates by +-1."""
import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial
from typing import Sequence

import numpy as np

from src.services.errors import InvalidLatticeError

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class LatticeSpec:
    """The pair (M, N): M heads per step in dimension N."""

    M: int
    N: int

    def __post_init__(self):
        if not isinstance(self.M, int) or not isinstance(self.N, int):
            raise InvalidLatticeError(f"M and N must be integers, got M={self.M!r} N={self.N!r}")
        if self.M < 1 or self.M > self.N:
            raise InvalidLatticeError(f"need 1 <= M <= N, got M={self.M} N={self.N}")

    @property
    def q(self) -> int:
        return coordination_number(self)

    @property
    def parity_vanishing(self) -> bool:
        """True when every closed walk has even length."""
        return self.M % 2 == 1 or self.M == self.N

    @property
    def label(self) -> str:
        return f"{self.M}-{self.N}"


@dataclass(frozen=True)
class DirectionVector:
    coords: tuple[int, ...]

    def __neg__(self) -> "DirectionVector":
        return DirectionVector(tuple(-c for c in self.coords))

    @property
    def support(self) -> int:
        return sum(1 for c in self.coords if c)


def coordination_number(spec: LatticeSpec) -> int:
    return 2 ** spec.M * comb(spec.N, spec.M)


@lru_cache(maxsize=None)
def direction_table(M: int, N: int) -> tuple[tuple[int, ...], ...]:
    return tuple(
        coords for coords in itertools.product((-1, 0, 1), repeat=N)
        if sum(1 for c in coords if c) == M
    )


def direction_vectors(spec: LatticeSpec) -> list[DirectionVector]:
    """All steps of the lattice in lexicographic order."""
    return [DirectionVector(coords) for coords in direction_table(spec.M, spec.N)]


def direction_array(spec: LatticeSpec) -> np.ndarray:
    """Direction vectors as a (q, N) int64 array, rows in lexicographic order."""
    return np.array(direction_table(spec.M, spec.N), dtype=np.int64)


def structure_function(spec: LatticeSpec, theta: Sequence[float]) -> float:
    """
    Normalized Fourier symbol sigma_M(cos theta_1, ..., cos theta_N) / binom(N, M).

    Args:
        spec: Lattice
        theta: N angles

    Returns:
        Value in [-1, 1]
    """
    cosines = np.cos(np.asarray(theta, dtype=float))
    if cosines.shape != (spec.N,):
        raise ValueError(f"expected {spec.N} angles, got shape {cosines.shape}")
    # np.poly gives prod(x - c_i), whose k-th coefficient is (-1)^k e_k
    coeffs = np.poly(cosines)
    sigma = (-1) ** spec.M * coeffs[spec.M]
    return float(sigma / comb(spec.N, spec.M))


def canonical_site(site: Sequence[int]) -> tuple[int, ...]:
    """Representative of a site under the signed-permutation group."""
    return tuple(sorted(abs(x) for x in site))


def orbit_size(rep: Sequence[int]) -> int:
    """Number of sites in the signed-permutation orbit of a canonical representative."""
    size = factorial(len(rep))
    for _, group in itertools.groupby(rep):
        size //= factorial(len(list(group)))
    return size * 2 ** sum(1 for x in rep if x)
