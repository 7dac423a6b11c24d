"""Deterministic random streams.

Scene-level streams come from ``SeedSequence`` spawn keys; Monte Carlo trials
use Philox with the trial index placed in the counter, so trial ``t`` can be
regenerated in isolation and results never depend on execution order.
"""

import numpy as np

# domain tags keep unrelated consumers of the same master seed apart
SCENE = 1
DELAY = 2
MONTE_CARLO = 3
PHASE = 4


def substream(seed: int, *path: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def _philox_key(seed: int, domain: int) -> np.ndarray:
    words = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(domain),)).generate_state(2, np.uint64)
    return words


def trial_stream(seed: int, trial: int, domain: int = MONTE_CARLO, key: np.ndarray | None = None) -> np.random.Generator:
    """Generator for a single Monte Carlo trial (counter-based split).

    ``key`` may be passed to skip re-deriving it from (seed, domain); it must
    equal ``_philox_key(seed, domain)``.
    """
    if trial < 0:
        raise ValueError("trial index must be nonnegative")
    counter = np.array([0, 0, trial, 0], dtype=np.uint64)
    bitgen = np.random.Philox(counter=counter, key=_philox_key(seed, domain) if key is None else key)
    return np.random.Generator(bitgen)


def complex_normal(rng: np.random.Generator, size, scale: float = 1.0) -> np.ndarray:
    """Circularly-symmetric CN(0, scale) samples."""
    z = rng.standard_normal(size=(2,) + tuple(np.atleast_1d(size)))
    return np.sqrt(scale / 2.0) * (z[0] + 1j * z[1])
