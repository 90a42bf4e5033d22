"""
Guessing recurrences and theta-ODEs from term prefixes.

Each candidate shape is a homogeneous linear system over the unknown
coefficients. The system is solved modulo several word-size primes, the kernel
vectors are combined by CRT and rational reconstruction, and the result is
checked exactly on every supplied term.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Optional, Union

from src.services.errors import OperatorFormatError
from src.services.linalg import modular_rref
from src.services.modular import crt_combine, prime_stream, rational_reconstruct, reduce_fraction
from src.services.pfinite import (
    PolyRec,
    ThetaODE,
    integer_roots,
    rec_add,
    rec_unroll,
    rec_verify,
    theta_ode_to_rec,
)
from src.services.settings import get_settings
from src.services.termtable import TermTable

_LOGGER = logging.getLogger(__name__)

REC = "rec"
ODE = "theta-ode"
ORDER_FIRST = "order-first"
DEGREE_FIRST = "degree-first"


@dataclass
class GuessConfig:
    max_order: int = 6
    max_degree: int = 30
    objective: str = ORDER_FIRST
    oversample: int = 25
    prime_count: int = 2
    max_primes: int = 64
    prime_bits: int = 62
    workers: Optional[int] = None

    def __post_init__(self):
        if self.objective not in (ORDER_FIRST, DEGREE_FIRST):
            raise ValueError(f"objective must be {ORDER_FIRST!r} or {DEGREE_FIRST!r}")
        if self.oversample < 25:
            raise ValueError(f"oversample must be >= 25, got {self.oversample}")
        if self.prime_count < 2:
            raise ValueError(f"prime_count must be >= 2, got {self.prime_count}")
        if self.max_order < 0 or self.max_degree < 0:
            raise ValueError("search bounds must be nonnegative")


@dataclass
class GuessReport:
    found: Optional[Union[PolyRec, ThetaODE]]
    order: Optional[int]
    degree: Optional[int]
    equations_used: int = 0
    primes_used: int = 0
    verified_terms: int = 0
    reconstruction_status: str = "not-found"
    frontier: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "found": self.found.to_dict() if self.found is not None else None,
            "order": self.order,
            "degree": self.degree,
            "equations_used": self.equations_used,
            "primes_used": self.primes_used,
            "verified_terms": self.verified_terms,
            "reconstruction_status": self.reconstruction_status,
            "frontier": [list(entry) for entry in self.frontier],
        }


@dataclass
class CertificationReport:
    passed: bool
    first_failure: Optional[int]
    margin: int
    held_out_primes: int
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "first_failure": self.first_failure,
            "margin": self.margin,
            "held_out_primes": self.held_out_primes,
            "detail": self.detail,
        }


# --- linear systems --------------------------------------------------------------

def unknowns(A: int, B: int) -> int:
    return (A + 1) * (B + 1)


def _system_rows(kind: str, values: list[int], A: int, B: int, p: int):
    """
    Rows of the system modulo p.

    rec: unknown c_{l,j}, row n >= A is sum_l sum_j c_{l,j} n^j t(n - l)  (A = order, B = degree)
    ode: unknown u_{k,l}, row n >= 0 is sum_l sum_k u_{k,l} (n - l)^k t(n - l)  (A = theta order, B = z degree)
    """
    if kind == REC:
        for n in range(A, len(values)):
            powers = [1] * (B + 1)
            for j in range(1, B + 1):
                powers[j] = powers[j - 1] * n % p
            row = []
            for ell in range(A + 1):
                t = values[n - ell]
                row.extend(x * t % p for x in powers)
            yield row
    else:
        for n in range(len(values)):
            row = []
            for ell in range(B + 1):
                k_count = A + 1
                if n - ell < 0:
                    row.extend([0] * k_count)
                    continue
                t = values[n - ell]
                x = (n - ell) % p
                acc = t
                for _ in range(k_count):
                    row.append(acc)
                    acc = acc * x % p
            yield row


def _row_count(kind: str, length: int, A: int) -> int:
    return length - A if kind == REC else length


def _solve_mod_p(kind: str, values: list[int], A: int, B: int, p: int) -> tuple[int, Optional[int], Optional[list[int]]]:
    """(nullity, first free column, kernel vector normalized at that column)."""
    reduced = [v % p for v in values]
    echelon = modular_rref(_system_rows(kind, reduced, A, B, p), unknowns(A, B), p)
    if echelon.nullity == 0:
        return 0, None, None
    free = echelon.free_columns[0]
    return echelon.nullity, free, echelon.null_vector(free)


def _solve_many(kind: str, values: list[int], A: int, B: int, primes: list[int], workers: int) -> list:
    if workers == 1 or len(primes) == 1:
        return [_solve_mod_p(kind, values, A, B, p) for p in primes]
    with ProcessPoolExecutor(max_workers=min(workers, len(primes))) as executor:
        return list(executor.map(_solve_mod_p, *zip(*[(kind, values, A, B, p) for p in primes])))


def _to_operator(kind: str, A: int, B: int, vector: list[int]) -> Union[PolyRec, ThetaODE]:
    if kind == REC:
        coeffs = [vector[ell * (B + 1):(ell + 1) * (B + 1)] for ell in range(A + 1)]
        return PolyRec(tuple(tuple(c) for c in coeffs)).canonical()
    # vector index ell * (A + 1) + k holds u_{k,l}
    coeffs = [[vector[ell * (A + 1) + k] for ell in range(B + 1)] for k in range(A + 1)]
    return ThetaODE(tuple(tuple(c) for c in coeffs)).canonical()


class _Solver:
    """One guessing run: memoized existence checks and the reconstruction loop."""

    def __init__(self, kind: str, table: TermTable, cfg: GuessConfig):
        if not table.is_exact:
            raise ValueError("guessing needs exact terms")
        self.kind = kind
        self.values = list(table.terms)
        self.cfg = cfg
        self.workers = cfg.workers or get_settings().workers
        self.stream = list(prime_stream(cfg.prime_bits, cfg.max_primes + 1))
        self.frontier: list = []
        self._outcomes: dict = {}

    def supported(self, A: int, B: int) -> bool:
        rows = _row_count(self.kind, len(self.values), A)
        return rows >= unknowns(A, B) + self.cfg.oversample

    def max_second(self, A: int) -> int:
        """Largest B with enough rows for (A, B)."""
        rows = _row_count(self.kind, len(self.values), A)
        return (rows - self.cfg.oversample) // (A + 1) - 1

    def max_first(self, B: int) -> int:
        A = -1
        while self.supported(A + 1, B):
            A += 1
        return A

    def exists(self, A: int, B: int) -> bool:
        key = (A, B)
        if key in self._outcomes:
            return self._outcomes[key]
        primes = self.stream[: self.cfg.prime_count]
        results = _solve_many(self.kind, self.values, A, B, primes, self.workers)
        nullities = {r[0] for r in results}
        if len(nullities) > 1:
            _LOGGER.warning(f"Nullity mismatch across primes at {key}: {sorted(nullities)}; candidate aborted")
            outcome, found = "unlucky-primes", False
        else:
            found = nullities.pop() >= 1
            outcome = "solution" if found else "none"
        self.frontier.append((A, B, outcome))
        _LOGGER.debug(f"exists {self.kind} {key}: {outcome}")
        self._outcomes[key] = found
        return found

    def reconstruct(self, A: int, B: int) -> tuple[Optional[Union[PolyRec, ThetaODE]], str, int]:
        """Exact kernel vector of the (A, B) system; returns (operator, status, primes used)."""
        used: list[int] = []
        vectors: dict[int, list[int]] = {}
        free_column = None
        cursor = 0
        size = unknowns(A, B)

        def take(count: int) -> list[int]:
            nonlocal cursor
            batch = self.stream[cursor:cursor + count]
            cursor += count
            return batch

        pending = take(self.cfg.prime_count)
        while True:
            if not pending:
                return None, "reconstruction-failed", len(used)
            for p, (nullity, free, vector) in zip(pending, _solve_many(self.kind, self.values, A, B, pending, self.workers)):
                if nullity != 1:
                    status = "non-unique" if nullity > 1 else "not-found"
                    _LOGGER.warning(f"{self.kind} {(A, B)} has nullity {nullity} modulo {p}")
                    return None, status, len(used) + 1
                if free_column is None:
                    free_column = free
                if free != free_column:
                    _LOGGER.warning(f"Kernel shape differs modulo {p}; unlucky prime")
                    return None, "unlucky-primes", len(used) + 1
                used.append(p)
                vectors[p] = vector

            modulus_value = [crt_combine((vectors[p][i], p) for p in used) for i in range(size)]
            fractions = [rational_reconstruct(value, modulus) for value, modulus in modulus_value]
            if any(f is None for f in fractions):
                _LOGGER.debug(f"reconstruction incomplete with {len(used)} primes")
                pending = take(1)
                continue

            held = take(1)
            if not held:
                return None, "reconstruction-failed", len(used)
            p = held[0]
            nullity, free, vector = _solve_mod_p(self.kind, self.values, A, B, p)
            if nullity == 1 and free == free_column and all(
                reduce_fraction(f, p) == v for f, v in zip(fractions, vector)
            ):
                denominator = lcm(*(f.denominator for f in fractions))
                integers = [int(f * denominator) for f in fractions]
                try:
                    operator = _to_operator(self.kind, A, B, integers)
                except OperatorFormatError as e:
                    _LOGGER.warning(f"Kernel vector at {(A, B)} is not an operator of that shape: {e}")
                    return None, "reconstruction-failed", len(used) + 1
                return operator, "ok", len(used) + 1
            _LOGGER.warning(f"Held-out prime {p} rejected the reconstruction; adding it to the basis")
            pending = [p]


def _search(kind: str, table: TermTable, cfg: GuessConfig) -> GuessReport:
    solver = _Solver(kind, table, cfg)
    # first = order (rec: recurrence order L; ode: theta order K)
    first_max = cfg.max_order
    second_max = cfg.max_degree

    candidate = None
    if cfg.objective == ORDER_FIRST:
        for A in range(first_max + 1):
            top = min(second_max, solver.max_second(A))
            if top < 0:
                break
            if not solver.exists(A, top):
                continue
            lo, hi = 0, top
            while lo < hi:
                mid = (lo + hi) // 2
                if solver.exists(A, mid):
                    hi = mid
                else:
                    lo = mid + 1
            candidate = (A, lo)
            break
    else:
        for B in range(second_max + 1):
            top = min(first_max, solver.max_first(B))
            if top < 0:
                break
            if not solver.exists(top, B):
                continue
            lo, hi = 0, top
            while lo < hi:
                mid = (lo + hi) // 2
                if solver.exists(mid, B):
                    hi = mid
                else:
                    lo = mid + 1
            candidate = (lo, B)
            break

    if candidate is None:
        status = "insufficient-terms" if not solver.frontier else "not-found"
        _LOGGER.info(f"No {kind} found for {table.spec.label} within order {first_max}, degree {second_max}")
        return GuessReport(None, None, None, reconstruction_status=status, frontier=solver.frontier)

    A, B = candidate
    operator, status, primes_used = solver.reconstruct(A, B)
    rows = _row_count(kind, len(table), A)
    report = GuessReport(
        None, A, B,
        equations_used=rows,
        primes_used=primes_used,
        reconstruction_status=status,
        frontier=solver.frontier,
    )
    if operator is None:
        return report

    check = rec_verify(operator, table) if kind == REC else rec_verify(theta_ode_to_rec(operator), table, padded=True)
    if not check:
        _LOGGER.warning(f"Candidate {kind} {(A, B)} failed exact verification at n={check.first_failure}")
        report.reconstruction_status = "verification-failed"
        return report
    report.found = operator
    report.verified_terms = len(table)
    _LOGGER.info(f"Guessed {kind} for {table.spec.label}: order {A}, degree {B}, {primes_used} primes")
    return report


def guess_rec(terms: TermTable, cfg: Optional[GuessConfig] = None) -> GuessReport:
    """Minimal recurrence within the configured bounds."""
    return _search(REC, terms, cfg or GuessConfig())


def guess_theta_ode(terms: TermTable, cfg: Optional[GuessConfig] = None) -> GuessReport:
    """Minimal theta-ODE within the configured bounds; order = theta power, degree = z power."""
    return _search(ODE, terms, cfg or GuessConfig())


def certify_candidate(candidate: PolyRec, oracle_terms: TermTable, extra_primes: int = 2) -> CertificationReport:
    """
    Re-verify a recurrence on independent terms and re-solve its shape modulo held-out primes.

    The candidate must lie in the kernel of its (order, degree) system modulo every
    held-out prime; a kernel of dimension above 1 means the shape is not minimal
    and is reported in the detail. The margin is the number of verified rows
    beyond the unknown count.
    """
    L, D = candidate.order, candidate.degree
    margin = len(oracle_terms) - L - unknowns(L, D)
    if margin < 1:
        return CertificationReport(False, None, margin, 0, f"{len(oracle_terms)} terms leave no rows beyond the unknowns")
    check = rec_verify(candidate, oracle_terms)
    if not check:
        return CertificationReport(False, check.first_failure, margin, 0, f"recurrence fails at n={check.first_failure}")

    # 61-bit primes are disjoint from the 62-bit primes used for guessing
    held_out = list(prime_stream(61, extra_primes))
    values = list(oracle_terms.terms)
    target = [c for p in candidate.coeffs for c in (list(p) + [0] * (D + 1 - len(p)))]
    dimensions = set()
    for p in held_out:
        reduced = [v % p for v in values]
        echelon = modular_rref(_system_rows(REC, reduced, L, D, p), unknowns(L, D), p)
        if echelon.nullity == 0:
            return CertificationReport(False, None, margin, len(held_out), f"trivial kernel modulo {p}")
        if any(sum(x * t for x, t in zip(row, target)) % p for row in echelon.pivots.values()):
            return CertificationReport(False, None, margin, len(held_out), f"kernel modulo {p} misses the candidate")
        dimensions.add(echelon.nullity)
    if dimensions != {1}:
        _LOGGER.info(f"Certified recurrence of order {L}, degree {D} is not minimal for its shape: kernel dimension {sorted(dimensions)}")
        return CertificationReport(True, None, margin, len(held_out), f"ok, kernel dimension {max(dimensions)}")
    return CertificationReport(True, None, margin, len(held_out), "ok")


# --- equivalence -----------------------------------------------------------------

def _singular_tail(rec: PolyRec) -> int:
    """One past the largest nonnegative integer root of p_0, or 0."""
    roots = [r for r in integer_roots(rec.coeffs[0]) if r >= 0]
    return max(roots) + 1 if roots else 0


def _trailing_tail(rec: PolyRec, reach: int) -> int:
    """One past the largest root of p_L(n - k) for 0 <= k <= reach, or 0."""
    roots = integer_roots(rec.coeffs[-1])
    return max(0, max(roots) + reach + 1) if roots else 0


def seed_length(rec: PolyRec) -> int:
    """Initial values needed to unroll without hitting a root of p_0."""
    return max(rec.order, _singular_tail(rec))


def rec_equivalent_on(a: PolyRec, b: PolyRec, initial: list) -> bool:
    """
    Whether a and b generate the same sequence from the given initial values.

    The difference of the two unrolled sequences is annihilated by rec_add(a, b),
    so it vanishes identically once it vanishes on a window as long as that
    recurrence's order, placed past every seed, every root of its leading
    coefficient and every root of the multipliers used to divide a and b.
    """
    combined = rec_add(a, b)
    seed_a, seed_b = seed_length(a), seed_length(b)
    if len(initial) < max(seed_a, seed_b):
        raise ValueError(f"need {max(seed_a, seed_b)} initial values, got {len(initial)}")
    start = max(
        seed_a, seed_b, combined.order, _singular_tail(combined),
        _trailing_tail(a, combined.order), _trailing_tail(b, combined.order),
    )
    nmax = start + combined.order
    left = rec_unroll(a, list(initial[:seed_a]), nmax, allow_fractions=True)
    right = rec_unroll(b, list(initial[:seed_b]), nmax, allow_fractions=True)
    equal = all(Fraction(x) == Fraction(y) for x, y in zip(left, right))
    _LOGGER.debug(f"rec_equivalent_on: window {nmax + 1}, combined order {combined.order}: {equal}")
    return equal
