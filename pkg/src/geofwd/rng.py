"""Counter-based random streams.

Every stream is a pure function of a 64-bit master seed and an integer key
path, so a trial block or a packet transfer draws the same numbers no matter
which worker runs it or in what order.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError

SEED_MAX = 2**64 - 1


def _check(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(_check(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A child master seed for the sub-computation addressed by ``key``."""
    ss = np.random.SeedSequence(_check(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def seed_from(rng) -> int:
    """Accept either a seed or a Generator; a Generator is consumed for one draw."""
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63))
    return _check(rng)
