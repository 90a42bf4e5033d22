"""Seeded Monte Carlo walks for cross-checking return probabilities."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.services.lattice import LatticeSpec, direction_array
from src.services.settings import get_settings

_LOGGER = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(GOLDEN_GAMMA)
_U_MIX1 = np.uint64(MIX1)
_U_MIX2 = np.uint64(MIX2)
_U30, _U27, _U31 = np.uint64(30), np.uint64(27), np.uint64(31)


@dataclass(frozen=True)
class WalkResult:
    returned: bool
    return_step: Optional[int]
    final_site: tuple[int, ...]


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 stream. Returns (new_state, output)."""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return state, z ^ (z >> 31)


def _splitmix64_array(state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    state = state + _U_GOLDEN
    z = (state ^ (state >> _U30)) * _U_MIX1
    z = (z ^ (z >> _U27)) * _U_MIX2
    return state, z ^ (z >> _U31)


def sample_walk(spec: LatticeSpec, horizon: int, seed: int) -> WalkResult:
    """Walk from the origin until the first return or the horizon."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    steps = [tuple(int(c) for c in row) for row in direction_array(spec)]
    q = len(steps)
    state = seed & MASK64
    site = [0] * spec.N
    for step in range(1, horizon + 1):
        state, z = splitmix64(state)
        move = steps[z % q]
        site = [a + b for a, b in zip(site, move)]
        if not any(site):
            return WalkResult(True, step, tuple(site))
    return WalkResult(False, None, tuple(site))


def simulate_batch(spec: LatticeSpec, horizon: int, trial_ids: np.ndarray, seed: int) -> np.ndarray:
    """
    Vectorized walks; trial i follows the stream seeded with seed ^ i.

    Returns:
        int64 array of first-return steps, 0 where the walk did not return
    """
    steps = direction_array(spec)
    q = np.uint64(len(steps))
    ids = np.asarray(trial_ids, dtype=np.uint64)
    state = ids ^ np.uint64(seed & MASK64)
    result = np.zeros(len(ids), dtype=np.int64)
    position = np.zeros((len(ids), spec.N), dtype=np.int64)
    alive = np.arange(len(ids))

    with np.errstate(over="ignore"):
        for step in range(1, horizon + 1):
            if alive.size == 0:
                break
            state, z = _splitmix64_array(state)
            position += steps[(z % q).astype(np.intp)]
            hit = ~position.any(axis=1)
            if hit.any():
                result[alive[hit]] = step
                keep = ~hit
                alive, state, position = alive[keep], state[keep], position[keep]
    return result


def _count_returns(spec: LatticeSpec, horizon: int, start: int, stop: int, seed: int) -> int:
    steps = simulate_batch(spec, horizon, np.arange(start, stop, dtype=np.uint64), seed)
    return int(np.count_nonzero(steps))


def mc_return_probability(
    spec: LatticeSpec,
    horizon: int,
    trials: int,
    seed: int,
    batch_size: Optional[int] = None,
    workers: Optional[int] = None,
) -> tuple[float, float]:
    """
    Fraction of walks returning to the origin within the horizon.

    Returns:
        (estimate, binomial standard error)
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    settings = get_settings()
    batch_size = batch_size or settings.mc_batch_size
    workers = workers or settings.workers

    batches = [(start, min(start + batch_size, trials)) for start in range(0, trials, batch_size)]
    _LOGGER.info(f"MC {spec.label}: {trials} trials, horizon {horizon}, {len(batches)} batches")

    returned = 0
    if workers == 1 or len(batches) == 1:
        for start, stop in batches:
            returned += _count_returns(spec, horizon, start, stop, seed)
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(_count_returns, spec, horizon, start, stop, seed)
                for start, stop in batches
            ]
            for future in as_completed(futures):
                returned += future.result()

    estimate = returned / trials
    stderr = math.sqrt(estimate * (1.0 - estimate) / trials)
    return estimate, stderr
