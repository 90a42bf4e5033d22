import pytest

from src.services.errors import BudgetExceededError, InvalidLatticeError, NonIntegralTermError
from src.services.lattice import LatticeSpec
from src.services.modular import prime_stream
from src.services.pfinite import PolyRec
from src.services.term_cache import get_term_cache
from src.services.termgen import (
    default_method,
    estimate_walk_states,
    extend_terms,
    factor_dp_value,
    generate_terms,
    terms_closed_form,
    terms_factor_dp,
    terms_factor_dp_table,
    terms_heracles,
    terms_walk_dp,
)
from src.services.termtable import Normalization, TermTable

P = prime_stream(62, 1)[0]


def test_walk_dp_square_lattice():
    assert terms_walk_dp(LatticeSpec(1, 2), 4).terms == (1, 0, 4, 0, 36)


def test_walk_dp_symmetry_reduction():
    spec = LatticeSpec(2, 3)
    reduced = terms_walk_dp(spec, 8)
    full = terms_walk_dp(spec, 8, reduce_symmetry=False)
    assert reduced.terms == full.terms
    assert reduced.terms[3] == 48


def test_walk_dp_budget():
    with pytest.raises(BudgetExceededError) as info:
        terms_walk_dp(LatticeSpec(2, 3), 100, budget=10)
    assert info.value.estimated_states == estimate_walk_states(LatticeSpec(2, 3), 100)


def test_estimate_walk_states():
    assert estimate_walk_states(LatticeSpec(2, 3), 10) == 56
    assert estimate_walk_states(LatticeSpec(2, 3), 10, reduce_symmetry=False) == 11 ** 3


@pytest.mark.parametrize("M, N, nmax", [(2, 3, 10), (2, 4, 8), (3, 5, 6), (3, 4, 8)])
def test_factor_dp_matches_walk_dp(M, N, nmax):
    spec = LatticeSpec(M, N)
    assert terms_factor_dp_table(spec, nmax, workers=1).terms == terms_walk_dp(spec, nmax).terms


def test_factor_dp_single_value():
    spec = LatticeSpec(2, 3)
    assert terms_factor_dp(spec, 3, workers=1) == 48
    assert terms_factor_dp(spec, 3, modulus=7) == 48 % 7
    assert factor_dp_value(2, 3, 2) == 12


def test_factor_dp_modular_table():
    spec = LatticeSpec(2, 3)
    exact = terms_factor_dp_table(spec, 10, workers=1)
    modular = terms_factor_dp_table(spec, 10, modulus=P, workers=1)
    assert modular.terms == exact.reduce(P).terms
    assert modular.modulus == P


@pytest.mark.parametrize("M, N, nmax", [(2, 3, 10), (3, 4, 10), (4, 5, 7)])
def test_heracles_matches_factor_dp(M, N, nmax):
    spec = LatticeSpec(M, N)
    assert terms_heracles(spec, nmax).terms == terms_factor_dp_table(spec, nmax, workers=1).terms


def test_heracles_values():
    assert terms_heracles(LatticeSpec(3, 4), 2).terms[2] == 32
    assert terms_heracles(LatticeSpec(4, 5), 5).terms[5] == 933120


def test_heracles_modular():
    spec = LatticeSpec(3, 4)
    assert terms_heracles(spec, 12, modulus=P).terms == terms_heracles(spec, 12).reduce(P).terms


def test_heracles_needs_one_excluded_coordinate():
    with pytest.raises(InvalidLatticeError):
        terms_heracles(LatticeSpec(2, 4), 4)


@pytest.mark.parametrize("M, N", [(1, 3), (3, 3), (1, 2), (2, 2)])
def test_closed_form_matches_walk_dp(M, N):
    spec = LatticeSpec(M, N)
    assert terms_closed_form(spec, 10).terms == terms_walk_dp(spec, 10).terms


def test_closed_form_values():
    assert terms_closed_form(LatticeSpec(1, 3), 4).terms[4] == 90
    assert terms_closed_form(LatticeSpec(1, 1), 6).terms == (1, 0, 2, 0, 6, 0, 20)


def test_closed_form_modular():
    spec = LatticeSpec(2, 2)
    assert terms_closed_form(spec, 20, modulus=P).terms == terms_closed_form(spec, 20).reduce(P).terms


def test_closed_form_rejects_other_lattices():
    with pytest.raises(InvalidLatticeError):
        terms_closed_form(LatticeSpec(2, 4), 4)


def test_default_method():
    assert default_method(LatticeSpec(3, 3)) == "closed-form"
    assert default_method(LatticeSpec(1, 4)) == "closed-form"
    assert default_method(LatticeSpec(3, 4)) == "heracles"
    assert default_method(LatticeSpec(2, 4)) == "factor-dp"


def test_generate_terms_normalizations():
    spec = LatticeSpec(2, 3)
    raw = generate_terms(spec, 11)
    even = generate_terms(spec, 5, normalization=Normalization.TILDE)
    odd = generate_terms(spec, 5, normalization=Normalization.TILDE_ODD)
    assert len(even) == len(odd) == 6
    assert even.terms == raw.terms[0::2]
    assert odd.terms == raw.terms[1::2]


def test_generate_terms_uses_cache():
    spec = LatticeSpec(1, 1)
    first = generate_terms(spec, 10, normalization=Normalization.TILDE)
    path = get_term_cache().path_for(spec, Normalization.TILDE, "closed-form")
    assert path.exists()
    assert generate_terms(spec, 6, normalization=Normalization.TILDE).terms == first.terms[:7]


def test_generate_terms_unknown_method():
    with pytest.raises(ValueError):
        generate_terms(LatticeSpec(1, 1), 4, method="guesswork")


def test_extend_terms():
    spec = LatticeSpec(1, 1)
    central = PolyRec(((0, 1), (2, -4)))
    seed = generate_terms(spec, 4, normalization=Normalization.TILDE)
    extended = extend_terms(central, seed, 20)
    assert extended.terms == generate_terms(spec, 20, normalization=Normalization.TILDE).terms
    assert extended.method == "closed-form+rec"


def test_extend_terms_rejects_negative_values():
    table = TermTable(LatticeSpec(1, 1), Normalization.TILDE, 0, (1,), "closed-form")
    with pytest.raises(NonIntegralTermError):
        extend_terms(PolyRec(((1,), (1,))), table, 3)
