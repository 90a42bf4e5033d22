import math

import mpmath
import pytest
from mpmath import mpf

from src.services.analysis import asymptotic_fit, polya_estimate, richardson
from src.services.errors import InsufficientTermsError
from src.services.lattice import LatticeSpec
from src.services.modular import prime_stream
from src.services.termgen import generate_terms
from src.services.termtable import Normalization


def test_richardson_is_exact_on_polynomials_in_inverse_n():
    value = richardson(lambda k: 1 + mpf(1) / k + mpf(3) / k ** 2, 5, 2)
    assert float(value) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        richardson(lambda k: mpf(1), 0, 2)


def test_asymptotics_of_central_binomials():
    fit = asymptotic_fit(generate_terms(LatticeSpec(1, 1), 400))
    assert fit.normalization == "tilde"
    assert fit.rho == pytest.approx(4.0, rel=1e-8)
    assert fit.alpha == -0.5
    assert fit.alpha_snapped
    assert fit.C == pytest.approx(1 / math.sqrt(math.pi), rel=1e-6)
    assert not fit.low_confidence


def test_short_fit_is_low_confidence():
    fit = asymptotic_fit(generate_terms(LatticeSpec(1, 1), 60, normalization=Normalization.TILDE))
    assert fit.low_confidence


@pytest.mark.parametrize("M, N", [(1, 1), (1, 2), (2, 2)])
def test_low_dimensions_are_recurrent(M, N):
    estimate = polya_estimate(generate_terms(LatticeSpec(M, N), 200))
    assert estimate.status == "recurrent"
    assert estimate.value == 1.0
    assert math.isinf(estimate.green_value)
    assert estimate.to_dict()["green_value"] is None


def test_body_centred_cubic_polya_number():
    estimate = polya_estimate(generate_terms(LatticeSpec(3, 3), 400))
    assert estimate.status == "transient"
    assert estimate.beta == 1.5
    assert estimate.value == pytest.approx(0.28223, abs=5e-5)
    assert estimate.tail_bound < 5e-4


def test_tight_tolerance_asks_for_more_terms():
    table = generate_terms(LatticeSpec(3, 3), 400)
    with pytest.raises(InsufficientTermsError) as info:
        polya_estimate(table, tolerance=1e-30)
    assert info.value.required > len(table.to_tilde())


def test_too_few_terms():
    with pytest.raises(InsufficientTermsError):
        polya_estimate(generate_terms(LatticeSpec(3, 3), 10))


def test_analysis_rejects_unsuitable_tables():
    odd = generate_terms(LatticeSpec(2, 3), 30, normalization=Normalization.TILDE_ODD)
    with pytest.raises(ValueError):
        polya_estimate(odd)
    p = prime_stream(62, 1)[0]
    with pytest.raises(ValueError):
        asymptotic_fit(generate_terms(LatticeSpec(2, 3), 30).reduce(p))


@pytest.mark.slow
def test_simple_cubic_polya_number():
    estimate = polya_estimate(generate_terms(LatticeSpec(1, 3), 1500))
    assert estimate.value == pytest.approx(0.34054, abs=5e-5)


def test_tail_bound_covers_first_order_correction():
    table = generate_terms(LatticeSpec(3, 3), 400).to_tilde()
    estimate = polya_estimate(table)
    n0 = len(table) - 1
    with mpmath.workdps(50):
        t = mpf(table.terms[n0]) / mpf(table.step_base) ** n0
        C1 = n0 * (t * mpf(n0) ** estimate.beta - mpf(estimate.C))
        correction = abs(C1 * mpmath.zeta(estimate.beta + 1, n0 + 1)) / mpf(estimate.green_value) ** 2
    assert correction > 0
    assert estimate.tail_bound >= float(correction) * (1 - 1e-6)
