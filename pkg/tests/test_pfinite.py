from fractions import Fraction

import pytest

from src.services.errors import NonIntegralTermError, OperatorFormatError, SingularRecurrenceError
from src.services.pfinite import (
    DiffOpD,
    PolyRec,
    ThetaODE,
    convert,
    forward_coefficients,
    integer_roots,
    minimal_degree_ode,
    ode_anchors,
    ode_compose_power,
    operator_from_dict,
    padded_failures,
    proportionality,
    rec_add,
    rec_anchors,
    rec_interleave,
    rec_to_theta_ode,
    rec_unroll,
    rec_verify,
    right_remainder,
    theta_d_convert,
    theta_ode_to_rec,
)

# (n + 1) c(n) = (4n - 2) c(n - 1)
CATALAN = PolyRec(((1, 1), (2, -4)))
FIBONACCI = PolyRec(((1,), (-1,), (-1,)))
# 1 / (1 - z): (1 - z) theta F = z F
ONES_ODE = ThetaODE(((0, -1), (1, -1)))
ONES_REC = PolyRec(((0, 1), (0, -1)))


def test_operator_shape():
    assert CATALAN.order == 1
    assert CATALAN.degree == 1
    assert ONES_ODE.order == 1
    assert ONES_ODE.u(0, 1) == -1


def test_recurrence_needs_nonzero_ends():
    with pytest.raises(OperatorFormatError):
        PolyRec(((), (1,)))
    with pytest.raises(OperatorFormatError):
        ThetaODE(((1,), ()))


def test_canonical_form():
    rec = PolyRec(((-2, -2), (-4, 8)))
    assert rec.canonical() == CATALAN
    assert CATALAN.is_canonical()
    assert ThetaODE(((0, 0, 2), (0, -2, 2))).canonical() == ONES_ODE


def test_unroll_catalan_and_fibonacci():
    assert rec_unroll(CATALAN, [1], 10)[10] == 16796
    assert rec_unroll(FIBONACCI, [0, 1], 10)[10] == 55


def test_unroll_singular():
    rec = PolyRec(((-3, 1), (3, -1)))
    with pytest.raises(SingularRecurrenceError) as info:
        rec_unroll(rec, [1], 5)
    assert info.value.index == 3


def test_unroll_non_integral():
    rec = PolyRec(((0, 2), (-1,)))
    with pytest.raises(NonIntegralTermError) as info:
        rec_unroll(rec, [1], 3)
    assert info.value.index == 1
    assert rec_unroll(rec, [1], 2, allow_fractions=True) == [1, Fraction(1, 2), Fraction(1, 8)]


def test_unroll_needs_initial_values():
    with pytest.raises(ValueError):
        rec_unroll(FIBONACCI, [0], 5)


def test_rec_verify():
    values = rec_unroll(CATALAN, [1], 20)
    assert rec_verify(CATALAN, values)
    bad = values[:7] + [values[7] + 1] + values[8:]
    check = rec_verify(CATALAN, bad)
    assert not check.passed
    assert check.first_failure == 7


def test_padded_rows():
    ones = [1] * 10
    shift = PolyRec(((1,), (-1,)))
    assert rec_verify(shift, ones)
    assert padded_failures(shift, ones) == [0]
    assert rec_verify(ONES_REC, ones, padded=True)


def test_theta_ode_to_rec():
    assert theta_ode_to_rec(ONES_ODE) == ONES_REC
    assert rec_verify(theta_ode_to_rec(ONES_ODE), [1] * 12, padded=True)


def test_rec_to_theta_ode():
    assert rec_to_theta_ode(ONES_REC) == ONES_ODE
    shift = PolyRec(((1,), (-1,)))
    assert rec_to_theta_ode(shift) == ThetaODE(((1, -1),))
    assert rec_to_theta_ode(shift, kill_rows=[0]) == ONES_ODE


def test_minimal_degree_ode():
    assert minimal_degree_ode(PolyRec(((1,), (-1,)))) == ONES_ODE
    ode = minimal_degree_ode(CATALAN)
    assert (ode.order, ode.degree) == (2, 1)
    catalan = [1, 1, 2, 5, 14, 42, 132, 429, 1430, 4862, 16796, 58786]
    assert rec_verify(theta_ode_to_rec(ode), catalan, padded=True)


def test_theta_d_convert():
    theta_squared = ThetaODE(((), (), (1,)))
    d_form = theta_d_convert(theta_squared)
    assert d_form == DiffOpD(((), (1,), (0, 1)))
    assert theta_d_convert(d_form) == theta_squared


def test_rec_add():
    ones = PolyRec(((1,), (-1,)))
    powers = PolyRec(((1,), (-2,)))
    total = rec_add(ones, powers)
    assert total == PolyRec(((1,), (-3,), (2,)))
    assert rec_verify(total, [1 + 2 ** n for n in range(12)])


def test_rec_add_polynomial_coefficients():
    total = rec_add(CATALAN, FIBONACCI)
    catalan = rec_unroll(CATALAN, [1], 30)
    fibonacci = rec_unroll(FIBONACCI, [0, 1], 30)
    assert rec_verify(total, [a + b for a, b in zip(catalan, fibonacci)])


def test_right_remainder():
    ones = PolyRec(((1,), (-1,)))
    powers = PolyRec(((1,), (-2,)))
    assert right_remainder(PolyRec(((1,), (-3,), (2,))), ones) == ()
    assert right_remainder(powers, ones) == ((1,),)


def test_rec_add_returns_left_multiple():
    ones = PolyRec(((1,), (-1,)))
    total = PolyRec(((1,), (-3,), (2,)))
    assert rec_add(ones, total) == total
    assert rec_add(total, ones) == total
    # Catalan with an extra factor n + 5 on every coefficient
    padded = PolyRec(((5, 6, 1), (10, -18, -4)))
    assert rec_add(CATALAN, padded) == padded


def test_rec_interleave():
    powers = PolyRec(((1,), (-2,)))
    assert rec_interleave(powers, 0) == PolyRec(((1,), (), (-2,)))
    factorial = PolyRec(((1,), (0, -1)))
    even = rec_interleave(factorial, 0)
    assert even == PolyRec(((2,), (), (0, -1)))
    assert rec_verify(even, [1, 0, 1, 0, 2, 0, 6, 0, 24])
    assert rec_verify(rec_interleave(factorial, 1), [0, 1, 0, 1, 0, 2, 0, 6, 0, 24])
    with pytest.raises(ValueError):
        rec_interleave(powers, 2)


def test_ode_compose_power():
    assert ode_compose_power(ONES_ODE, 2) == ThetaODE(((0, 0, -2), (1, 0, -1)))
    assert ode_compose_power(ONES_ODE, 1) == ONES_ODE
    with pytest.raises(ValueError):
        ode_compose_power(ONES_ODE, 0)


def test_forward_coefficients_and_anchors():
    assert forward_coefficients(CATALAN) == [(-2, -4), (2, 1)]
    assert rec_anchors(CATALAN) == {
        "first_constant": -2,
        "first_leading": -4,
        "last_constant": 2,
        "last_leading": 1,
    }
    anchors = ode_anchors(ONES_ODE)
    assert anchors["theta_constants"] == [0, 1]
    assert anchors["leading"] == -1
    assert anchors["leading_z_degree"] == 1


def test_proportionality():
    assert proportionality([2, 4, 0], [1, 2, 0]) == 2
    assert proportionality([-2, -4], [1, 2]) == -2
    assert proportionality([2, 4], [1, 3]) is None
    assert proportionality([0, 1], [1, 1]) is None


def test_operator_dict_roundtrip():
    assert operator_from_dict(CATALAN.to_dict()) == CATALAN
    assert operator_from_dict(ONES_ODE.to_dict()) == ONES_ODE
    data = CATALAN.to_dict()
    data["order"] = 3
    with pytest.raises(OperatorFormatError):
        operator_from_dict(data)
    with pytest.raises(OperatorFormatError):
        operator_from_dict({"kind": "matrix", "coeffs": []})


def test_integer_roots():
    assert integer_roots((0, 5, 1)) == [-5, 0]
    assert integer_roots((1, 0, 1)) == []
    assert integer_roots((7,)) == []


def test_convert_dispatch():
    assert convert("ode2rec", ONES_ODE) == ONES_REC
    assert convert("compose", ONES_ODE, power=2) == ode_compose_power(ONES_ODE, 2)
    assert convert("rec2ode", PolyRec(((1,), (-1,))), kill_rows=[0]) == ONES_ODE
    with pytest.raises(OperatorFormatError):
        convert("ode2rec", CATALAN)
    with pytest.raises(OperatorFormatError):
        convert("add", CATALAN)
    with pytest.raises(ValueError):
        convert("transpose", CATALAN)
