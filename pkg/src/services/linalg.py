"""Exact elimination: streamed RREF over Z/pZ and fraction-free Gauss-Jordan over Z[x]."""
import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import gmpy2
from sympy import Poly

_LOGGER = logging.getLogger(__name__)


@dataclass
class ModularRREF:
    """Reduced row echelon basis of the rows seen so far, modulo p."""

    ncols: int
    p: int
    pivots: dict[int, list[int]]

    @property
    def rank(self) -> int:
        return len(self.pivots)

    @property
    def nullity(self) -> int:
        return self.ncols - len(self.pivots)

    @property
    def pivot_columns(self) -> tuple[int, ...]:
        return tuple(sorted(self.pivots))

    @property
    def free_columns(self) -> tuple[int, ...]:
        return tuple(c for c in range(self.ncols) if c not in self.pivots)

    def insert(self, row: Sequence[int]) -> bool:
        """Add a row; returns True when it raised the rank."""
        p = self.p
        row = [x % p for x in row]
        for c, pivot_row in self.pivots.items():
            f = row[c]
            if f:
                row = [(x - f * y) % p for x, y in zip(row, pivot_row)]
        lead = next((c for c, x in enumerate(row) if x), None)
        if lead is None:
            return False
        inv = int(gmpy2.invert(row[lead], p))
        row = [x * inv % p for x in row]
        for c, pivot_row in self.pivots.items():
            f = pivot_row[lead]
            if f:
                self.pivots[c] = [(x - f * y) % p for x, y in zip(pivot_row, row)]
        self.pivots[lead] = row
        return True

    def null_vector(self, free: int) -> list[int]:
        """Kernel vector with 1 in the given free column and 0 in the other free columns."""
        if free in self.pivots:
            raise ValueError(f"column {free} is a pivot column")
        vector = [0] * self.ncols
        vector[free] = 1
        for c, pivot_row in self.pivots.items():
            vector[c] = (-pivot_row[free]) % self.p
        return vector


def modular_rref(rows: Iterable[Sequence[int]], ncols: int, p: int, stop_at_full_rank: bool = True) -> ModularRREF:
    """
    Streamed elimination modulo p; memory stays O(ncols^2).

    With stop_at_full_rank the remaining rows are skipped once the kernel is trivial.
    """
    echelon = ModularRREF(ncols, p, {})
    for row in rows:
        echelon.insert(row)
        if stop_at_full_rank and echelon.rank == ncols:
            break
    return echelon


def ff_gauss_jordan(
    matrix: list[list[Poly]], stop_at_free: bool = False
) -> tuple[list[list[Poly]], Poly, list[int]]:
    """
    Fraction-free Gauss-Jordan elimination over a polynomial ring.

    Returns (A, den, pivots) where A / den is the reduced row echelon form and every
    pivot entry of A equals den. With stop_at_free the elimination ends at the first
    column without a pivot; columns to its right are left partially reduced.
    """
    A = [list(row) for row in matrix]
    nrows = len(A)
    ncols = len(A[0]) if A else 0
    one = A[0][0].one if A else None
    den = one
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        pivot = next((i for i in range(r, nrows) if not A[i][c].is_zero), None)
        if pivot is None:
            if stop_at_free:
                break
            continue
        A[r], A[pivot] = A[pivot], A[r]
        lead = A[r][c]
        for i in range(nrows):
            if i == r:
                continue
            f = A[i][c]
            A[i] = [(lead * A[i][j] - f * A[r][j]).exquo(den) for j in range(ncols)]
        den = lead
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return A, den, pivots


def ff_kernel_vector(matrix: list[list[Poly]]) -> Optional[list[Poly]]:
    """Polynomial kernel vector for the first non-pivot column, or None if the columns are independent."""
    A, den, pivots = ff_gauss_jordan(matrix, stop_at_free=True)
    ncols = len(matrix[0])
    free = next((c for c in range(ncols) if c not in pivots), None)
    if free is None:
        return None
    vector = [den * 0 for _ in range(ncols)]
    vector[free] = den
    for row, c in enumerate(pivots):
        vector[c] = -A[row][free]
    return vector
