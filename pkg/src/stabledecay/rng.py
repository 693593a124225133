"""Deterministic random-number streams.

Everything stochastic in this package draws from a counter-based Philox
generator addressed by ``(seed, stream)``.  Identical pairs reproduce
identical draws on any platform; distinct stream ids give independent
streams, which is how ensembles parallelize without sharing state.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngSpec:
    """Address of a deterministic random stream."""

    seed: int
    stream: int = 0
    algorithm: str = "philox"

    def generator(self) -> np.random.Generator:
        if self.algorithm != "philox":
            raise ValueError(f"unknown rng algorithm {self.algorithm!r}")
        key = np.array([self.seed % 2**64, self.stream % 2**64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def with_stream(self, stream: int) -> "RngSpec":
        return RngSpec(seed=self.seed, stream=stream, algorithm=self.algorithm)


def as_generator(rng) -> np.random.Generator:
    """Accept an RngSpec, a Generator, or an integer seed."""
    if isinstance(rng, RngSpec):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngSpec(seed=int(rng)).generator()
    raise TypeError(f"cannot make a Generator out of {type(rng)!r}")
