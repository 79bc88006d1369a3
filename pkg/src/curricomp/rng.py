from __future__ import annotations

import zlib

import numpy as np


def _key_part(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    k = int(k)
    if k < 0:
        raise ValueError("stream keys must be non-negative")
    return k


class RngStream:
    """Seeded generator addressable by a key path.

    Named sub-streams (``sub``) are cached, so drawing from one never shifts
    the sequence of another. ``child`` derives a fresh stream for structured
    keys such as (epoch, batch, slot).
    """

    def __init__(self, seed: int, key: tuple = ()):
        self.seed = int(seed)
        self.key = tuple(_key_part(k) for k in key)
        self._generator = None
        self._subs: dict[str, RngStream] = {}

    @property
    def generator(self) -> np.random.Generator:
        # built on first draw; constructing a bit generator dominates the cost
        if self._generator is None:
            self._generator = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.key))
            )
        return self._generator

    def sub(self, name: str) -> "RngStream":
        if name not in self._subs:
            self._subs[name] = self._derive((_key_part(name),))
        return self._subs[name]

    def child(self, *keys) -> "RngStream":
        return self._derive(tuple(_key_part(k) for k in keys))

    def _derive(self, suffix: tuple) -> "RngStream":
        out = RngStream.__new__(RngStream)
        out.seed = self.seed
        out.key = self.key + suffix
        out._generator = None
        out._subs = {}
        return out

    def random(self, size=None):
        return self.generator.random(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def beta(self, a, b, size=None):
        return self.generator.beta(a, b, size)

    def choice(self, a, size=None, replace=True, p=None):
        return self.generator.choice(a, size=size, replace=replace, p=p)

    def permutation(self, x):
        return self.generator.permutation(x)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    return RngStream(int(rng))
