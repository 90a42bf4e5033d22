import numpy as np
import pytest

from src.services.lattice import LatticeSpec
from src.services.walker import mc_return_probability, sample_walk, simulate_batch, splitmix64


def test_splitmix64_reference_output():
    state, out = splitmix64(0)
    assert state == 0x9E3779B97F4A7C15
    assert out == 0xE220A8397B1DCDAF


def test_batch_matches_scalar_walks():
    spec = LatticeSpec(2, 3)
    seed = 12345
    ids = np.arange(64, dtype=np.uint64)
    batch = simulate_batch(spec, 60, ids, seed)
    for i in range(64):
        walk = sample_walk(spec, 60, seed ^ i)
        assert batch[i] == (walk.return_step or 0)


def test_return_steps_respect_parity():
    spec = LatticeSpec(1, 2)
    steps = simulate_batch(spec, 200, np.arange(500, dtype=np.uint64), 99)
    assert np.all(steps[steps > 0] % 2 == 0)


def test_one_dimensional_walks_mostly_return():
    estimate, stderr = mc_return_probability(LatticeSpec(1, 1), 1000, 2000, seed=7, workers=1)
    assert estimate > 0.9
    assert 0 < stderr < 0.01


def test_estimate_does_not_depend_on_batching():
    spec = LatticeSpec(2, 3)
    a = mc_return_probability(spec, 200, 3000, seed=5, batch_size=100, workers=1)
    b = mc_return_probability(spec, 200, 3000, seed=5, batch_size=1000, workers=3)
    assert a == b


def test_cubic_lattice_return_probability():
    # Finite horizon sits slightly below the Pólya number 0.34054
    estimate, _ = mc_return_probability(LatticeSpec(1, 3), 2000, 20000, seed=2024, workers=1)
    assert estimate == pytest.approx(0.334, abs=0.015)


@pytest.mark.parametrize("horizon, trials", [(0, 10), (10, 0)])
def test_invalid_arguments(horizon, trials):
    with pytest.raises(ValueError):
        mc_return_probability(LatticeSpec(1, 1), horizon, trials, seed=1)
