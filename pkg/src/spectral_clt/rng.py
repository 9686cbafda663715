"""Seed derivation.

Every random stream is a PCG64 generator keyed by ``(seed, *keys)`` through
``numpy.random.SeedSequence``; streams for different keys are statistically
independent, so results never depend on the order replicates are executed.
"""
import numpy as np

SEED_MASK = (1 << 64) - 1


def check_seed(seed):
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if seed < 0 or seed > SEED_MASK:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    return seed


def derive_rng(seed, *keys):
    """Return a ``numpy.random.Generator`` for the stream ``(seed, *keys)``."""
    seq = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(seed, *keys):
    """Derive a 64-bit child seed, e.g. for one (n, replicate) cell."""
    seq = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
