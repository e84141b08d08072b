"""Seeded random streams and the chunked replica runner.

Replicas are grouped into fixed-size chunks. Chunk ``c`` of stream ``s``
in a run seeded with ``seed`` always draws from ``Philox`` keyed by
``SeedSequence(seed, spawn_key=(s, c))``, so results depend only on
``(seed, reps)`` and never on how many workers executed the chunks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

DEFAULT_SEED = 20240917
CHUNK_REPS = 2048

T = TypeVar("T")


def generator(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for substream ``key`` of the root ``seed``."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(reps: int, chunk: int = CHUNK_REPS) -> list[int]:
    full, rest = divmod(int(reps), chunk)
    return [chunk] * full + ([rest] if rest else [])


def run_chunks(
    fn: Callable[[np.random.Generator, int], T],
    reps: int,
    seed: int,
    workers: int = 1,
    chunk: int = CHUNK_REPS,
    stream: int = 0,
) -> list[T]:
    """Call ``fn(rng, size)`` once per chunk and return results in chunk order.

    ``stream`` separates independent uses of the same root seed.
    """
    sizes = chunk_sizes(reps, chunk)
    jobs = [(generator(seed, stream, c), s) for c, s in enumerate(sizes)]
    if workers <= 1 or len(jobs) <= 1:
        return [fn(g, s) for g, s in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))
