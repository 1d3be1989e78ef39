"""Deterministic random-stream management.

A single master seed is expanded into independent named substreams so that
every stochastic component (source draws, dither, training noise, parameter
init, evaluation) is reproducible in isolation.  Streams are backed by the
counter-based Philox generator, so shard ``k`` of a Monte Carlo job can be
opened directly without generating the preceding shards.

Splitting rule (stable across releases): the child stream named ``name`` with
shard index ``index`` is seeded by ``SeedSequence([master, crc32(name),
index])``.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["substream", "shard_sizes"]


def substream(master_seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Open the named child stream of a master seed."""
    if master_seed < 0:
        raise ValueError("master_seed must be nonnegative")
    if index < 0:
        raise ValueError("index must be nonnegative")
    key = zlib.crc32(name.encode("utf-8"))
    seq = np.random.SeedSequence([int(master_seed), key, int(index)])
    return np.random.Generator(np.random.Philox(seq))


def shard_sizes(total: int, shard: int) -> list[int]:
    """Split ``total`` draws into fixed-size shards (last one may be short).

    The shard layout depends only on (total, shard), never on worker count,
    so merged Monte Carlo results are reproducible under any parallelism.
    """
    if total < 1 or shard < 1:
        raise ValueError("total and shard must be positive")
    full, rest = divmod(total, shard)
    return [shard] * full + ([rest] if rest else [])
