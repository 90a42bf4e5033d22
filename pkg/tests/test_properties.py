"""Randomized round trips and cross-checks, seeded so failures replay."""
import random
from fractions import Fraction

import pytest

from src.services.guess import GuessConfig, guess_rec
from src.services.lattice import LatticeSpec
from src.services.modular import crt_combine, prime_stream, rational_reconstruct, reconstruct_verified, reduce_fraction
from src.services.pfinite import (
    PolyRec,
    ThetaODE,
    rec_add,
    rec_to_theta_ode,
    rec_unroll,
    rec_verify,
    theta_d_convert,
    theta_ode_to_rec,
)
from src.services.termgen import terms_closed_form, terms_factor_dp_table, terms_heracles, terms_walk_dp
from src.services.termtable import Normalization, TermTable

SEEDS = range(8)


def _nonzero(rng: random.Random, bound: int = 5) -> int:
    return rng.choice([k for k in range(-bound, bound + 1) if k])


def _positive_linear(rng: random.Random) -> tuple[int, int]:
    # no roots at n >= 0
    return rng.randint(1, 5), rng.randint(0, 3)


def _random_ode(rng: random.Random) -> ThetaODE:
    K, d = rng.randint(1, 3), rng.randint(1, 3)
    rows = [tuple(rng.randint(-5, 5) for _ in range(d + 1)) for _ in range(K + 1)]
    rows[K] = (_nonzero(rng),) + rows[K][1:]
    return ThetaODE(tuple(rows))


def _random_rec(rng: random.Random, order: int, degree: int) -> PolyRec:
    middle = [tuple(rng.randint(-4, 4) for _ in range(degree + 1)) for _ in range(order - 1)]
    return PolyRec((_positive_linear(rng), *middle, _positive_linear(rng)))


def _planted(rng: random.Random) -> PolyRec:
    L, D = rng.randint(1, 2), rng.randint(1, 2)
    coeffs = [(1,)]
    for _ in range(1, L):
        coeffs.append(tuple(rng.randint(-4, 4) for _ in range(D + 1)))
    # positive coefficients keep p_L free of roots at n >= 0
    coeffs.append(tuple(rng.randint(1, 4) for _ in range(D + 1)))
    return PolyRec(tuple(coeffs))


def _table(values) -> TermTable:
    return TermTable(LatticeSpec(1, 1), Normalization.RAW, 0, tuple(values), "planted")


def _guess(values, rec: PolyRec) -> PolyRec:
    cfg = GuessConfig(max_order=rec.order, max_degree=rec.degree, workers=1)
    return guess_rec(_table(values), cfg).found


@pytest.mark.parametrize("seed", SEEDS)
def test_ode_rec_round_trip(seed):
    rng = random.Random(seed)
    ode = _random_ode(rng)
    assert rec_to_theta_ode(theta_ode_to_rec(ode)) == ode.canonical()
    rec = _random_rec(rng, rng.randint(1, 3), rng.randint(0, 3))
    assert theta_ode_to_rec(rec_to_theta_ode(rec)) == rec.canonical()


@pytest.mark.parametrize("seed", SEEDS)
def test_theta_d_round_trip(seed):
    ode = _random_ode(random.Random(100 + seed))
    assert theta_d_convert(theta_d_convert(ode)) == ode.canonical()


@pytest.mark.parametrize("seed", SEEDS)
def test_rec_add_annihilates_sum(seed):
    rng = random.Random(200 + seed)
    a = _random_rec(rng, rng.randint(1, 2), 1)
    b = _random_rec(rng, rng.randint(1, 2), 1)
    f = rec_unroll(a, [rng.randint(-5, 5) for _ in range(a.order)], 199, allow_fractions=True)
    g = rec_unroll(b, [rng.randint(-5, 5) for _ in range(b.order)], 199, allow_fractions=True)
    total = rec_add(a, b)
    assert total.order <= a.order + b.order
    assert rec_verify(total, [x + y for x, y in zip(f, g)])


@pytest.mark.parametrize("seed", SEEDS)
def test_planted_recurrence_is_recovered(seed):
    rng = random.Random(300 + seed)
    planted = _planted(rng)
    values = rec_unroll(planted, [rng.randint(1, 9) for _ in range(planted.order)], 79)
    assert _guess(values, planted) == planted


@pytest.mark.parametrize("seed", SEEDS[:4])
def test_guessing_is_invariant_under_scaling(seed):
    rng = random.Random(400 + seed)
    planted = _planted(rng)
    values = rec_unroll(planted, [rng.randint(1, 9) for _ in range(planted.order)], 79)
    c, k = rng.randint(2, 50), rng.randint(2, 5)
    assert _guess([c * v for v in values], planted) == planted
    # k^n f(n) has p_l(n) k^l
    stretched = PolyRec(tuple(tuple(k ** ell * x for x in p) for ell, p in enumerate(planted.coeffs)))
    assert _guess([k ** n * v for n, v in enumerate(values)], stretched) == stretched.canonical()


@pytest.mark.parametrize("seed", SEEDS)
def test_crt_round_trip(seed):
    rng = random.Random(500 + seed)
    primes = list(prime_stream(62, rng.randint(2, 5)))
    modulus = 1
    for p in primes:
        modulus *= p
    x = rng.randrange(modulus)
    assert crt_combine([(x % p, p) for p in primes]) == (x, modulus)


@pytest.mark.parametrize("seed", SEEDS)
def test_rational_reconstruction_round_trip(seed):
    rng = random.Random(600 + seed)
    value = Fraction(rng.randint(-2 ** 60, 2 ** 60), rng.randint(1, 2 ** 60))
    primes = list(prime_stream(62, 3))
    residues = [(reduce_fraction(value, p), p) for p in primes]
    image, modulus = crt_combine(residues)
    assert rational_reconstruct(image, modulus) == value
    held_out = prime_stream(61, 1)[0]
    assert reconstruct_verified(residues, (reduce_fraction(value, held_out), held_out)) == value


def _oracles(spec: LatticeSpec, nmax: int) -> dict[str, tuple[int, ...]]:
    found = {
        "walk-dp": terms_walk_dp(spec, nmax).terms,
        "factor-dp": terms_factor_dp_table(spec, nmax, workers=1).terms,
    }
    if spec.M == spec.N - 1:
        found["heracles"] = terms_heracles(spec, nmax).terms
    if spec.M in (1, spec.N):
        found["closed-form"] = terms_closed_form(spec, nmax).terms
    return found


@pytest.mark.parametrize(
    "M, N",
    [
        pytest.param(M, N, marks=pytest.mark.slow) if N == 5 else (M, N)
        for N in range(1, 6)
        for M in range(1, N + 1)
    ],
)
def test_term_oracles_agree(M, N):
    found = _oracles(LatticeSpec(M, N), 14)
    reference = found.pop("walk-dp")
    assert reference[0] == 1
    for method, terms in found.items():
        assert terms == reference, method
