import itertools
import math

import pytest

from src.services.errors import InvalidLatticeError
from src.services.lattice import (
    LatticeSpec,
    canonical_site,
    coordination_number,
    direction_array,
    direction_vectors,
    orbit_size,
    structure_function,
)


@pytest.mark.parametrize(
    "M, N, q",
    [(1, 1, 2), (1, 3, 6), (2, 3, 12), (3, 3, 8), (3, 4, 32), (2, 5, 40), (3, 5, 80), (4, 5, 80)],
)
def test_coordination_number(M, N, q):
    spec = LatticeSpec(M, N)
    assert coordination_number(spec) == q
    assert spec.q == q
    assert len(direction_vectors(spec)) == q
    assert direction_array(spec).shape == (q, N)


def test_directions_have_M_heads_and_are_symmetric():
    spec = LatticeSpec(2, 4)
    steps = direction_vectors(spec)
    assert all(v.support == 2 for v in steps)
    assert {(-v).coords for v in steps} == {v.coords for v in steps}


@pytest.mark.parametrize("M, N", [(0, 3), (4, 3), (-1, 2)])
def test_invalid_lattice(M, N):
    with pytest.raises(InvalidLatticeError):
        LatticeSpec(M, N)


def test_invalid_lattice_is_a_value_error():
    with pytest.raises(ValueError):
        LatticeSpec(3, 2)


@pytest.mark.parametrize(
    "M, N, vanishing",
    [(1, 3, True), (2, 3, False), (2, 2, True), (3, 4, True), (4, 5, False), (3, 5, True)],
)
def test_parity_vanishing(M, N, vanishing):
    assert LatticeSpec(M, N).parity_vanishing is vanishing


def test_label():
    assert LatticeSpec(3, 5).label == "3-5"


def test_structure_function():
    spec = LatticeSpec(2, 3)
    assert structure_function(spec, [0, 0, 0]) == pytest.approx(1.0)
    assert structure_function(spec, [0, 0, math.pi]) == pytest.approx(-1 / 3)
    assert structure_function(LatticeSpec(3, 3), [math.pi] * 3) == pytest.approx(-1.0)


def test_structure_function_wrong_arity():
    with pytest.raises(ValueError):
        structure_function(LatticeSpec(2, 3), [0.0, 0.0])


def test_canonical_site_and_orbits():
    assert canonical_site((-2, 0, 1)) == (0, 1, 2)
    assert orbit_size((0, 1, 2)) == 24
    assert orbit_size((0, 0, 0)) == 1
    assert orbit_size((1, 1)) == 4


def test_orbits_partition_the_cube():
    reps = {canonical_site(s) for s in itertools.product((-1, 0, 1), repeat=3)}
    assert sum(orbit_size(r) for r in reps) == 27
