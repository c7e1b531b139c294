"""Seeded random streams.

All randomness goes through numpy's PCG64 (a 64-bit permuted congruential
generator) keyed by :class:`numpy.random.SeedSequence`. Independent streams
are derived by appending integer keys to the master seed, e.g.
``stream(seed, 7)`` for the stream of playlist 7, so any sub-computation can
be reproduced on its own.

Reference trace (used as a golden value in the tests)::

    >>> bit_generator(0).random_raw(3)
    array([11749869230777074271,  4976686463289251617,   755828109848996024], dtype=uint64)

Permutations use Fisher-Yates with unbiased bounded integers computed from
the raw 64-bit outputs by rejection, so shuffles depend only on the PCG64
output stream and not on numpy's sampling helpers.
"""

import numpy as np

_TWO64 = 1 << 64


def _check_seed(seed):
    seed = int(seed)
    if seed < 0 or seed >= _TWO64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def bit_generator(seed, *keys):
    """Return a fresh PCG64 bit generator for ``(seed, *keys)``."""
    entropy = [_check_seed(seed)] + [int(k) for k in keys]
    return np.random.PCG64(np.random.SeedSequence(entropy))


def stream(seed, *keys):
    """Return a :class:`numpy.random.Generator` for ``(seed, *keys)``."""
    return np.random.Generator(bit_generator(seed, *keys))


def bounded(bitgen, n):
    """Uniform integer in ``[0, n)`` from raw PCG64 output (rejection sampling)."""
    if n <= 0:
        raise ValueError("n must be positive")
    limit = _TWO64 - (_TWO64 % n)
    while True:
        raw = int(bitgen.random_raw())
        if raw < limit:
            return raw % n


def fisher_yates(items, bitgen):
    """Return a uniformly permuted copy of ``items``."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = bounded(bitgen, i + 1)
        out[i], out[j] = out[j], out[i]
    return out
