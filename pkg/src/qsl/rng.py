"""Keyed counter-based random streams.

Every stochastic routine in the package draws from a stream keyed by a
(master seed, path) tuple instead of sharing one global generator.  Work can
then be distributed over any number of workers in any order and still produce
bit-identical output, because each unit of work (an example, a trajectory
batch, an epoch shuffle) owns its own stream.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream"]


def _as_key(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream path parts must be non-negative, got {part}")
        return int(part)
    if isinstance(part, str):
        # crc32 is stable across platforms and Python versions.
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"unsupported stream path part: {part!r}")


def stream(master_seed: int, *path) -> np.random.Generator:
    """Return a Philox generator keyed by (master_seed, path).

    Streams with distinct paths are statistically independent; the same
    (seed, path) always yields the same sequence.
    """
    key = tuple(_as_key(p) for p in path)
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
