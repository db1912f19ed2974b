"""Seed derivation for reproducible random streams.

Streams are produced by numpy's ``PCG64`` bit generator.  Child seeds
are derived from a base seed and a stream index with the SplitMix64
finaliser, so a replica's stream depends only on ``(seed, index)`` and
not on how many other replicas ran before it::

    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    child = z ^ (z >> 31)
"""

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(seed, index=0):
    """Derive a 64-bit child seed from ``seed`` and ``index``."""
    z = (int(seed) + (int(index) + 1) * _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def generator(seed, *path):
    """Return a ``numpy.random.Generator`` for the stream at ``path``.

    Each element of ``path`` is folded in with :func:`splitmix64`, so
    ``generator(s, 3, 7)`` is the stream of sub-replica 7 of replica 3.
    """
    s = int(seed) & _MASK
    for index in path:
        s = splitmix64(s, index)
    return np.random.Generator(np.random.PCG64(s))
