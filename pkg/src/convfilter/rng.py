"""Seeded random source shared by every stochastic component.

The raw bit stream is Philox4x64-10 (a counter-based generator) keyed with
the 128-bit integer ``seed`` and a zero counter, as exposed by
``numpy.random.Philox(key=seed)``.  Every derived draw is computed here from
raw 64-bit words so that another implementation can reproduce it exactly:

* ``uniform()``      -> ``(x >> 11) * 2**-53``            in [0, 1)
* ``below(n)``       -> ``(x * n) >> 64``                 in [0, n)
* ``normal()``       -> Box-Muller from two uniforms u1, u2:
                        ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``
* ``shuffle(seq)``   -> Fisher-Yates, ``j = below(i + 1)`` for i = n-1 .. 1
"""
from __future__ import annotations

import math

import numpy as np

_INV_2_53 = 1.0 / (1 << 53)


class Rng:
    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = int(seed)
        self._bits = np.random.Philox(key=self.seed)

    def raw(self, n: int | None = None):
        if n is None:
            return int(self._bits.random_raw())
        return self._bits.random_raw(n)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return low + (high - low) * ((self.raw() >> 11) * _INV_2_53)

    def uniform_array(self, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        words = self.raw(n) >> np.uint64(11)
        u = words.astype(np.float64) * _INV_2_53
        return (low + (high - low) * u).reshape(shape)

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("below() needs n >= 1")
        return (self.raw() * n) >> 64

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return mean + std * math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def bernoulli(self, p: float) -> bool:
        return self.uniform() < p

    def choice(self, items):
        return items[self.below(len(items))]

    def weighted_index(self, weights) -> int:
        total = float(sum(weights))
        r = self.uniform() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if r < acc:
                return i
        return len(weights) - 1

    def binomial(self, n: int, p: float) -> int:
        # n Bernoulli trials; n is a conversation length, so this stays cheap.
        return sum(1 for _ in range(n) if self.uniform() < p)

    def shuffle(self, seq: list) -> list:
        out = list(seq)
        for i in range(len(out) - 1, 0, -1):
            j = self.below(i + 1)
            out[i], out[j] = out[j], out[i]
        return out

    def spawn(self, stream: int) -> "Rng":
        """Independent child generator, keyed by (seed, stream)."""
        return Rng(self.seed + (int(stream) << 64))
