"""Deterministic seed derivation for every stochastic element.

All random draws in the workbench go through numpy Generators built
from SeedSequence entropy lists, so one integer per realization pins
bits, conditioning, PMD and interferer replacement reproducibly.
"""

import numpy as np

# Purpose tags keep independent streams from colliding.
BITS = 1
GAUSS_SYMBOLS = 2
CONDITION = 3
PMD = 4
ROADM = 5


def rng_for(*parts: int) -> np.random.Generator:
    """Generator seeded from an ordered tuple of integers."""
    return np.random.default_rng(np.random.SeedSequence([int(p) for p in parts]))


def derive_seed(*parts: int) -> int:
    """Collapse an ordered tuple of integers into one 32-bit seed."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])
