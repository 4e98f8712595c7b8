"""Seeded, splittable random streams.

Every stream is a PCG64 generator seeded from ``SeedSequence(seed,
spawn_key=key)``, so a stream is fully identified by the global seed and a
tuple of integer ids (replica, run, stage, ...).  Streams with equal
``(seed, key)`` replay identical draws; distinct keys give independent
sequences.  The generator object is handed to the compiled kernels as-is,
which draw from it with the same ziggurat normals numpy uses.
"""

from __future__ import annotations

import numpy as np

__all__ = ["RngStream"]


class RngStream:
    """A reproducible random stream owned by one worker at a time.

    Parameters
    ----------
    seed : int
        Global 64-bit seed.
    key : tuple of int, optional
        Stream identifier, e.g. ``(replica, run)``.

    Attributes
    ----------
    gen : numpy.random.Generator
        The underlying generator.
    workload : int
        Number of observed transition steps simulated with this stream.
    """

    def __init__(self, seed: int = 0, key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self.gen = np.random.Generator(np.random.PCG64(seq))
        self.workload = 0

    def child(self, *ids: int) -> "RngStream":
        """Independent stream keyed by this stream's key extended with `ids`."""
        return RngStream(self.seed, self.key + tuple(ids))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"
