"""
Counting sequences r_{M,N}(n) = CT sigma_M(Y_1, ..., Y_N)^n with Y_i = x_i + 1/x_i.

Four independent generators:

- walk_dp: position-space closed-walk counting on symmetry-reduced sites
- factor_dp: scan over variables, tracking how many factors have picked t variables
- heracles: composition sums for M = N - 1
- closed_form: M = N and M = 1
"""
import logging
import threading
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor, as_completed
from math import comb
from typing import Callable, Optional

import gmpy2

from src.services.errors import BudgetExceededError, InvalidLatticeError, NonIntegralTermError
from src.services.lattice import LatticeSpec, direction_table, canonical_site, orbit_size
from src.services.modular import crt_combine, primes_for_bound
from src.services.pfinite import PolyRec, rec_unroll
from src.services.settings import get_settings
from src.services.term_cache import get_term_cache
from src.services.termtable import Normalization, TermTable

_LOGGER = logging.getLogger(__name__)

METHODS = ("walk-dp", "factor-dp", "heracles", "closed-form")


class FactorialCache:
    """Factorials shared across generators; grows under a lock, never shrinks."""

    def __init__(self):
        self._facts = [1]
        self._inverse: dict[int, list[int]] = {}
        self._lock = threading.Lock()

    def _grow(self, n: int) -> None:
        with self._lock:
            facts = self._facts
            while len(facts) <= n:
                facts.append(facts[-1] * len(facts))

    def factorial(self, n: int) -> int:
        if n >= len(self._facts):
            self._grow(n)
        return self._facts[n]

    def binomial(self, n: int, k: int) -> int:
        if k < 0 or k > n:
            return 0
        f = self.factorial
        return f(n) // (f(k) * f(n - k))

    def inverse_factorials(self, p: int, n: int) -> list[int]:
        """1/k! mod p for k <= n."""
        cached = self._inverse.get(p)
        if cached is not None and len(cached) > n:
            return cached
        facts = [1] * (n + 1)
        for k in range(1, n + 1):
            facts[k] = facts[k - 1] * k % p
        inv = [1] * (n + 1)
        inv[n] = int(gmpy2.invert(facts[n], p))
        for k in range(n, 0, -1):
            inv[k - 1] = inv[k] * k % p
        with self._lock:
            self._inverse[p] = inv
        return inv


_factorials = FactorialCache()


def central_binomial_ct(d: int) -> int:
    """CT (x + 1/x)^d."""
    return _factorials.binomial(d, d // 2) if d % 2 == 0 else 0


def _binomial_convolution_power(
    g: Callable[[int], int],
    parts: int,
    size: int,
    modulus: int = 0,
) -> list[int]:
    """
    S(s) = sum over (e_1..e_parts) with sum s of s! / prod e_i! * prod g(e_i), for s <= size.

    Exact arithmetic uses binomials; modular arithmetic works on S(s) / s!.
    """
    weights = [g(e) for e in range(size + 1)]
    support = [e for e, w in enumerate(weights) if w]
    if modulus:
        p = modulus
        inv = _factorials.inverse_factorials(p, size)
        scaled = [weights[e] % p * inv[e] % p for e in range(size + 1)]
        current = [1] + [0] * size
        for _ in range(parts):
            current = [
                sum(scaled[e] * current[s - e] for e in support if e <= s) % p
                for s in range(size + 1)
            ]
        fact = 1
        result = []
        for s in range(size + 1):
            if s:
                fact = fact * s % p
            result.append(current[s] * fact % p)
        return result

    binomial = _factorials.binomial
    current = [1] + [0] * size
    for _ in range(parts):
        current = [
            sum(binomial(s, e) * weights[e] * current[s - e] for e in support if e <= s)
            for s in range(size + 1)
        ]
    return current


def _raw_table(spec: LatticeSpec, terms: list[int], modulus: int, method: str) -> TermTable:
    table = TermTable(spec, Normalization.RAW, modulus, tuple(terms), method)
    problems = table.violations()
    if problems:
        raise ArithmeticError(f"{method} produced an invalid table for {spec.label}: {problems}")
    return table


# --- walk DP ---------------------------------------------------------------------

def estimate_walk_states(spec: LatticeSpec, nmax: int, reduce_symmetry: bool = True) -> int:
    radius = (nmax + 1) // 2
    if reduce_symmetry:
        return comb(radius + spec.N, spec.N)
    return (2 * radius + 1) ** spec.N


def terms_walk_dp(
    spec: LatticeSpec,
    nmax: int,
    budget: Optional[int] = None,
    reduce_symmetry: bool = True,
) -> TermTable:
    """
    Exact r(n), n <= nmax, from walk counts c_m(s) of m-step walks ending at s.

    r(2m) = sum_s c_m(s)^2 and r(2m+1) = sum_s c_m(s) c_{m+1}(s). With
    reduce_symmetry the sites are signed-permutation representatives.
    """
    if nmax < 0:
        raise ValueError(f"nmax must be >= 0, got {nmax}")
    budget = budget if budget is not None else get_settings().walk_dp_budget
    estimated = estimate_walk_states(spec, nmax, reduce_symmetry)
    if estimated > budget:
        raise BudgetExceededError(
            f"walk DP for {spec.label} to n={nmax} needs about {estimated} states (budget {budget})",
            estimated_states=estimated,
        )

    steps = direction_table(spec.M, spec.N)
    origin = (0,) * spec.N
    radius = (nmax + 1) // 2

    if reduce_symmetry:
        weight = orbit_size

        def advance(counts: dict) -> dict:
            acc: dict = defaultdict(int)
            for site, value in counts.items():
                pushed = value * orbit_size(site)
                for v in steps:
                    acc[canonical_site([a + b for a, b in zip(site, v)])] += pushed
            return {site: total // orbit_size(site) for site, total in acc.items()}
    else:
        def weight(site) -> int:
            return 1

        def advance(counts: dict) -> dict:
            acc: dict = defaultdict(int)
            for site, value in counts.items():
                for v in steps:
                    acc[tuple(a + b for a, b in zip(site, v))] += value
            return dict(acc)

    terms = [1]
    current = {origin: 1}
    for m in range(radius):
        following = advance(current)
        if 2 * m + 1 <= nmax:
            terms.append(sum(weight(s) * c * following.get(s, 0) for s, c in current.items()))
        if 2 * m + 2 <= nmax:
            terms.append(sum(weight(s) * c * c for s, c in following.items()))
        current = following
    _LOGGER.debug(f"walk DP {spec.label}: {len(current)} sites at radius {radius}")
    return _raw_table(spec, terms[: nmax + 1], 0, "walk-dp")


# --- factor DP ---------------------------------------------------------------------

def _pascal(n: int, p: int) -> list[list[int]]:
    rows = [[1]]
    for k in range(1, n + 1):
        prev = rows[-1]
        row = [1] + [prev[i - 1] + prev[i] for i in range(1, k)] + [1]
        rows.append([x % p for x in row] if p else row)
    return rows


def factor_dp_value(M: int, N: int, n: int, p: int = 0) -> int:
    """
    CT sigma_M(Y)^n by scanning the variables, exactly (p = 0) or modulo p.

    Each of the n factors picks an M-subset of the variables. The state counts
    factors by how many variables they have picked so far; when M > N - M the
    complementary picks (excluded variables) are tracked instead, with variable
    exponent n - e.
    """
    complement = N - M < M
    classes = N - M if complement else M
    binom = _pascal(n, p)

    def weight(d: int) -> int:
        e = n - d if complement else d
        return binom[e][e // 2] if e % 2 == 0 else 0

    if classes == 0:
        value = weight(0) ** N
        return value % p if p else value

    states: dict = {(n,) + (0,) * (classes - 1): 1}
    for i in range(1, N + 1):
        floor_class = classes - (N - i)
        layer: dict = {(c, 0): a for c, a in states.items()}
        for t in range(classes - 1, -1, -1):
            forced = t < floor_class
            nxt: dict = defaultdict(int)
            for (c, d), a in layer.items():
                ct = c[t]
                if ct == 0:
                    nxt[(c, d)] += a
                    continue
                row = binom[ct]
                for m in range(ct if forced else 0, ct + 1):
                    moved = list(c)
                    moved[t] -= m
                    if t + 1 < classes:
                        moved[t + 1] += m
                    nxt[(tuple(moved), d + m)] += a * row[m]
            layer = nxt
            if p:
                layer = {key: a % p for key, a in layer.items() if a % p}
        states = defaultdict(int)
        for (c, d), a in layer.items():
            w = weight(d)
            if w:
                states[c] += a * w
        states = {c: (a % p if p else a) for c, a in states.items() if (a % p if p else a)}
    return states.get((0,) * classes, 0)


def terms_factor_dp(spec: LatticeSpec, n: int, modulus: Optional[int] = None, workers: Optional[int] = None) -> int:
    """
    r(n) by the factor-fill DP.

    With a modulus the value is returned modulo that prime; otherwise it is
    assembled from residues modulo enough 62-bit primes to exceed q^n.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if modulus:
        return factor_dp_value(spec.M, spec.N, n, modulus)
    values = _factor_dp_exact(spec, [n], workers)
    return values[n]


def _factor_dp_exact(spec: LatticeSpec, indices: list[int], workers: Optional[int]) -> dict[int, int]:
    settings = get_settings()
    workers = workers or settings.workers
    tasks = []
    for n in indices:
        if n == 0 or (spec.parity_vanishing and n % 2):
            continue
        for p in primes_for_bound(spec.q ** n, settings.prime_bits):
            tasks.append((n, p))
    residues = _run_factor_tasks(spec, tasks, workers)
    values = {}
    for n in indices:
        if n == 0:
            values[n] = 1
        elif spec.parity_vanishing and n % 2:
            values[n] = 0
        else:
            primes = primes_for_bound(spec.q ** n, settings.prime_bits)
            values[n], _ = crt_combine((residues[(n, p)], p) for p in primes)
    return values


def _run_factor_tasks(spec: LatticeSpec, tasks: list[tuple[int, int]], workers: int) -> dict:
    results = {}
    if workers == 1 or len(tasks) <= 1:
        for n, p in tasks:
            results[(n, p)] = factor_dp_value(spec.M, spec.N, n, p)
        return results
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {
            executor.submit(factor_dp_value, spec.M, spec.N, n, p): (n, p)
            for n, p in tasks
        }
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    return results


def terms_factor_dp_table(
    spec: LatticeSpec,
    nmax: int,
    modulus: int = 0,
    workers: Optional[int] = None,
) -> TermTable:
    """Raw table r(0..nmax) from the factor DP, fanned out over n and primes."""
    _LOGGER.info(f"Factor DP {spec.label} to n={nmax}" + (f" mod {modulus}" if modulus else ""))
    indices = list(range(nmax + 1))
    if modulus:
        tasks = [(n, modulus) for n in indices if not (spec.parity_vanishing and n % 2)]
        residues = _run_factor_tasks(spec, tasks, workers or get_settings().workers)
        terms = [residues.get((n, modulus), 0) for n in indices]
    else:
        values = _factor_dp_exact(spec, indices, workers)
        terms = [values[n] for n in indices]
    return _raw_table(spec, terms, modulus, "factor-dp")


# --- composition sums ----------------------------------------------------------

def terms_heracles(spec: LatticeSpec, nmax: int, modulus: int = 0) -> TermTable:
    """
    r(n) for M = N - 1 from the composition sum over exclusion counts.

    Each factor Y_1...Y_N / Y_i excludes one variable; with e_i exclusions of
    variable i, r(n) = sum n! / prod e_i! * prod CT(Y^(n - e_i)). For even N the
    odd terms vanish.
    """
    if spec.M != spec.N - 1:
        raise InvalidLatticeError(f"composition sums need M = N - 1, got {spec.label}")
    terms = [1]
    for n in range(1, nmax + 1):
        if spec.parity_vanishing and n % 2:
            terms.append(0)
            continue
        sums = _binomial_convolution_power(lambda e, n=n: central_binomial_ct(n - e), spec.N, n, modulus)
        terms.append(sums[n])
    return _raw_table(spec, terms, modulus, "heracles")


def terms_closed_form(spec: LatticeSpec, nmax: int, modulus: int = 0) -> TermTable:
    """M = N: r(2n) = binom(2n, n)^N. M = 1: N-fold composition of central binomials."""
    if spec.M == spec.N:
        terms = [0] * (nmax + 1)
        central = 1
        for k in range(0, nmax // 2 + 1):
            if k:
                central = central * (2 * k) * (2 * k - 1) // (k * k)
            terms[2 * k] = pow(central, spec.N, modulus) if modulus else central ** spec.N
        return _raw_table(spec, terms, modulus, "closed-form")
    if spec.M == 1:
        terms = _binomial_convolution_power(central_binomial_ct, spec.N, nmax, modulus)
        return _raw_table(spec, terms, modulus, "closed-form")
    raise InvalidLatticeError(f"closed form needs M = N or M = 1, got {spec.label}")


# --- extension -------------------------------------------------------------------

def extend_terms(rec: PolyRec, initial: TermTable, nmax: int) -> TermTable:
    """
    Extend an exact table to indices 0..nmax with a recurrence.

    Raises:
        SingularRecurrenceError: leading coefficient vanishes at a needed index
        NonIntegralTermError: a non-integral or negative value appears
    """
    if not initial.is_exact:
        raise ValueError("recurrence extension needs exact terms")
    values = rec_unroll(rec, list(initial.terms), nmax)
    for n, value in enumerate(values):
        if value < 0:
            raise NonIntegralTermError(f"negative value at n={n}", index=n)
    method = initial.method if initial.method.endswith("+rec") else f"{initial.method}+rec"
    _LOGGER.info(f"Extended {initial.spec.label} {initial.normalization.value} from {len(initial)} to {len(values)} terms")
    return TermTable(initial.spec, initial.normalization, 0, tuple(values), method)


# --- dispatch --------------------------------------------------------------------

def default_method(spec: LatticeSpec) -> str:
    if spec.M == spec.N or spec.M == 1:
        return "closed-form"
    if spec.M == spec.N - 1:
        return "heracles"
    return "factor-dp"


def _raw_count(normalization: Normalization, count: int) -> int:
    if normalization is Normalization.RAW:
        return count
    if normalization is Normalization.TILDE:
        return 2 * count - 1
    return 2 * count


def generate_terms(
    spec: LatticeSpec,
    nmax: int,
    method: str = "auto",
    normalization: Normalization = Normalization.RAW,
    modulus: int = 0,
    use_cache: bool = True,
) -> TermTable:
    """
    Terms 0..nmax in the requested normalization, through the disk cache.

    Tilde tables index the raw sequence at 2n (or 2n + 1 for tilde-odd).
    """
    normalization = Normalization(normalization)
    method = default_method(spec) if method == "auto" else method
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    count = nmax + 1
    cache = get_term_cache() if use_cache else None
    if cache is not None:
        cached = cache.get(spec, normalization, method, count, modulus)
        if cached is not None:
            return cached

    raw_nmax = _raw_count(normalization, count) - 1
    if method == "walk-dp":
        if modulus:
            raise ValueError("walk DP is exact only")
        raw = terms_walk_dp(spec, raw_nmax)
    elif method == "factor-dp":
        raw = terms_factor_dp_table(spec, raw_nmax, modulus)
    elif method == "heracles":
        raw = terms_heracles(spec, raw_nmax, modulus)
    else:
        raw = terms_closed_form(spec, raw_nmax, modulus)

    if normalization is Normalization.RAW:
        table = raw
    elif normalization is Normalization.TILDE:
        table = raw.to_tilde()
    else:
        table = raw.parity_parts()[1]
    table = table.head(count)
    if cache is not None:
        cache.set(table)
    return table
