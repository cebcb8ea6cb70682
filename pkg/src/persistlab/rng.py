"""Seeded random streams.

Trials are grouped into fixed blocks of ``BLOCK_TRIALS`` rows.  Block ``j``
of an experiment draws from a Philox-4x64 counter-based generator keyed by
``SeedSequence(seed, spawn_key=(*tags, j))``, so trial ``i`` always lives in
block ``i // BLOCK_TRIALS`` at row ``i % BLOCK_TRIALS`` whatever the number
of workers.  ``tags`` separate independent experiments sharing a seed
(ladder points, the two processes of a comparison, ...).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_TRIALS = 256
GENERATOR_ID = f"philox4x64/seedseq/block{BLOCK_TRIALS}"


def tag_of(name: str) -> int:
    """Stable small integer for a string tag (independent of PYTHONHASHSEED)."""
    return int.from_bytes(name.encode()[:8].ljust(8, b"\0"), "little") & 0x7FFFFFFF


def stream(seed: int, *tags: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(t) for t in tags))
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(n_trials: int) -> list[int]:
    full, rest = divmod(int(n_trials), BLOCK_TRIALS)
    return [BLOCK_TRIALS] * full + ([rest] if rest else [])


def map_blocks(fn, seed, n_trials, tags=(), workers=1):
    """Apply ``fn(generator, n_rows)`` to every trial block, results in block order."""
    sizes = block_sizes(n_trials)

    def run(j):
        return fn(stream(seed, *tags, j), sizes[j])

    if workers <= 1 or len(sizes) <= 1:
        return [run(j) for j in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(len(sizes))))
