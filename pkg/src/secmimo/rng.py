"""Seeded random substreams.

Every random quantity in the package comes from a generator derived from
``(master_seed, purpose, index)``. Trial ``i`` of a Monte Carlo run always sees
the same generator no matter how trials are chunked or scheduled.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

PURPOSES = {
    "scenario": 0,
    "trial": 1,
    "training": 2,
    "diagnostics": 3,
    "covariance": 4,
    "synthetic": 5,
}


def substream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    if not isinstance(seed, (int, np.integer)) or seed < 0 or seed >= 2**64:
        raise ValidationError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    try:
        key = PURPOSES[purpose]
    except KeyError:
        raise ValidationError(f"unknown RNG purpose {purpose!r}") from None
    ss = np.random.SeedSequence(int(seed), spawn_key=(key, int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1) samples."""
    shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
    x = rng.standard_normal(shape + (2,))
    return (x[..., 0] + 1j * x[..., 1]) * np.sqrt(0.5)
