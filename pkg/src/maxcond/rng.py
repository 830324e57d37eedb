"""Reproducible random streams.

Every sampler takes a ``numpy.random.Generator``.  Streams are built on the
counter-based Philox bit generator keyed by ``(seed, stream_id)``, so replicate
``i`` of an experiment is the same regardless of how replicates are scheduled.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *stream_id: int) -> np.random.Generator:
    if seed is None:
        raise ValueError("seed is mandatory")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream_id))
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(n: int, chunk: int) -> list[int]:
    """Fixed decomposition of ``n`` replicates into chunks (independent of thread count)."""
    if n <= 0:
        return []
    full, rest = divmod(n, chunk)
    return [chunk] * full + ([rest] if rest else [])
