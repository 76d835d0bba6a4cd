"""Reproducible random-number streams.

Every stochastic routine in the package takes an explicit ``numpy`` Generator.
Streams are derived from a master seed and an integer path with a documented,
platform-independent scheme so that results are reproducible and independent
of how replicates are distributed across workers:

    stream(seed, i) == Generator(Philox(SeedSequence((seed, i))))

Philox is counter-based, so distinct key material yields statistically
independent streams without coordination.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return the Generator for ``(seed, *path)``.

    ``path`` is typically a replicate index; nested components append further
    integers. The same tuple always yields the same stream.
    """
    entropy = (int(seed),) + tuple(int(p) for p in path)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def replicate_streams(seed: int, n_reps: int) -> list[np.random.Generator]:
    """Streams for replicates ``0..n_reps-1`` of a run seeded with ``seed``."""
    return [stream(seed, i) for i in range(n_reps)]


def geometric(rng: np.random.Generator, m: float, size: int | None = None):
    """Geometric litter sizes with mean ``m``: P(j) = m^j / (1+m)^(j+1), j >= 0.

    Sampled by inversion, floor(log U / log(m/(1+m))), so every consumer of
    geometric variates draws them identically.
    """
    if m <= 0.0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    q = m / (1.0 + m)
    # 1 - U lies in (0, 1], keeping the log finite.
    u = 1.0 - rng.random(size)
    out = np.floor(np.log(u) / np.log(q))
    if size is None:
        return int(out)
    return out.astype(np.int64)
