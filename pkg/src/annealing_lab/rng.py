"""Seeded counter-based random streams."""
from __future__ import annotations

import numpy as np


def make_rng(seed: int | None, *stream: int) -> np.random.Generator:
    """Philox generator keyed by ``seed`` and optional sub-stream indices.

    Distinct ``stream`` tuples give statistically independent generators,
    so parallel chains can each own one without sharing state.
    """
    if seed is None:
        raise ValueError("an explicit seed is required")
    ss = np.random.SeedSequence([int(seed), *map(int, stream)])
    return np.random.Generator(np.random.Philox(ss))
