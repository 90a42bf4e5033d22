"""Prime fields, Chinese remaindering and rational reconstruction."""
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd, prod
from typing import Iterable, Optional, Sequence

import gmpy2

from src.services.errors import DuplicatePrimeError, ReconstructionError

_LOGGER = logging.getLogger(__name__)

# Strong-probable-prime bases that are deterministic below 3.3 * 10^24
WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_probable_prime(n: int) -> bool:
    if n < 2:
        return False
    for w in WITNESSES:
        if n == w:
            return True
        if n % w == 0:
            return False
    return all(gmpy2.is_strong_prp(n, w) for w in WITNESSES)


@dataclass(frozen=True)
class PrimeBasis:
    """Distinct odd primes in [2^(bits-1), 2^bits)."""

    bits: int
    primes: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.primes)) != len(self.primes):
            raise DuplicatePrimeError("prime basis contains repeated primes")
        lo, hi = 1 << (self.bits - 1), 1 << self.bits
        for p in self.primes:
            if not lo <= p < hi:
                raise ValueError(f"prime {p} outside [2^{self.bits - 1}, 2^{self.bits})")

    def __len__(self) -> int:
        return len(self.primes)

    def __iter__(self):
        return iter(self.primes)

    def __getitem__(self, index):
        return self.primes[index]

    @property
    def product(self) -> int:
        return prod(self.primes)

    def extend(self, count: int) -> "PrimeBasis":
        """The same stream continued by count more primes."""
        return prime_stream(self.bits, len(self.primes) + count)


@lru_cache(maxsize=64)
def _primes_below(bits: int, count: int) -> tuple[int, ...]:
    lo = 1 << (bits - 1)
    found = []
    candidate = (1 << bits) - 1
    while len(found) < count:
        if candidate < lo:
            raise ValueError(f"fewer than {count} primes with {bits} bits")
        if is_probable_prime(candidate):
            found.append(candidate)
        candidate -= 2
    return tuple(found)


def prime_stream(bits: int, count: int) -> PrimeBasis:
    """count primes descending from 2^bits; deterministic."""
    if not 30 <= bits <= 62:
        raise ValueError(f"bits must be in [30, 62], got {bits}")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    return PrimeBasis(bits, _primes_below(bits, count))


def primes_for_bound(bound: int, bits: int = 62) -> PrimeBasis:
    """Smallest prefix of the stream whose product exceeds bound."""
    count = max(1, (bound.bit_length() + bits - 2) // (bits - 1) + 1)
    basis = prime_stream(bits, count)
    while basis.product <= bound:
        basis = basis.extend(1)
    return basis


def crt_combine(residues: Iterable[tuple[int, int]]) -> tuple[int, int]:
    """
    Combine residues (value, prime) into the unique value modulo their product.

    Returns:
        (value, modulus) with 0 <= value < modulus
    """
    value, modulus = 0, 1
    seen = set()
    for r, p in residues:
        if p in seen:
            raise DuplicatePrimeError(f"prime {p} appears twice")
        seen.add(p)
        if not 0 <= r < p:
            raise ValueError(f"residue {r} not reduced modulo {p}")
        # value + modulus * t == r (mod p)
        t = ((r - value) * int(gmpy2.invert(modulus % p, p))) % p
        value += modulus * t
        modulus *= p
    return value, modulus


def rational_reconstruct(
    value: int,
    modulus: int,
    num_bound: Optional[int] = None,
    den_bound: Optional[int] = None,
) -> Optional[Fraction]:
    """
    Find n/d with n == value * d (mod modulus), |n| <= num_bound, 0 < d <= den_bound.

    Both bounds default to floor(sqrt(modulus / 2)). Returns None when no such
    fraction exists.
    """
    if not 0 <= value < modulus:
        raise ValueError(f"value {value} not reduced modulo {modulus}")
    balanced = int(gmpy2.isqrt(modulus // 2))
    num_bound = balanced if num_bound is None else num_bound
    den_bound = balanced if den_bound is None else den_bound

    r0, r1 = modulus, value
    t0, t1 = 0, 1
    while r1 > num_bound:
        quotient = r0 // r1
        r0, r1 = r1, r0 - quotient * r1
        t0, t1 = t1, t0 - quotient * t1
    if t1 == 0 or abs(t1) > den_bound or gcd(r1, t1) != 1:
        return None
    if t1 < 0:
        r1, t1 = -r1, -t1
    return Fraction(r1, t1)


def reduce_fraction(value: Fraction, p: int) -> int:
    """Image of a rational in Z/pZ."""
    return value.numerator * int(gmpy2.invert(value.denominator % p, p)) % p


def reconstruct_verified(
    residues: Sequence[tuple[int, int]],
    held_out: tuple[int, int],
) -> Fraction:
    """Reconstruct from residues, then confirm against a held-out (value, prime)."""
    value, modulus = crt_combine(residues)
    candidate = rational_reconstruct(value, modulus)
    if candidate is None:
        raise ReconstructionError(f"no rational reconstruction modulo a {modulus.bit_length()}-bit modulus")
    check, prime = held_out
    if prime in {p for _, p in residues}:
        raise DuplicatePrimeError(f"held-out prime {prime} was used for reconstruction")
    if reduce_fraction(candidate, prime) != check % prime:
        raise ReconstructionError(f"reconstruction {candidate} rejected by held-out prime {prime}")
    return candidate
