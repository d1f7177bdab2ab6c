"""Random streams.

Every stochastic quantity is drawn from ``numpy.random.Generator`` over the
counter-based Philox bit generator.  Streams for individual trials, chunks or
draws are derived from a master seed and an integer key path through
``SeedSequence(master, spawn_key=key)``, so a stream depends only on its key
and never on which worker consumed it or in which order.

Normal variates come from ``Generator.standard_normal`` (numpy's ziggurat
sampler).  Changing the bit generator or the sampler changes every output
byte; both are fixed here on purpose.
"""
import numpy as np


def _check_seed(seed):
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def make_rng(seed, *key):
    seq = np.random.SeedSequence(_check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(seed, *key):
    """Deterministic 64-bit child seed for the stream at ``key`` under ``seed``."""
    seq = np.random.SeedSequence(_check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, np.uint64)[0])
