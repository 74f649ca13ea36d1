"""Simulated TRNG sources, XOR combination and nonce-collision arithmetic."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels


class EntropySource:
    """Seeded bit stream where each bit is 1 with probability ``bias``.

    Bits are i.i.d.; identical (seed, bias) pairs give identical streams.
    """

    def __init__(self, seed: int, bias: float = 0.5, label: str = ""):
        if not 0.0 <= bias <= 1.0:
            raise ValueError(f"bias must lie in [0, 1], got {bias}")
        if not 0 <= seed < 1 << 64:
            raise ValueError("seed must be an unsigned 64-bit value")
        self.seed = seed
        self.bias = bias
        self.label = label
        self._rng = np.random.Generator(np.random.PCG64(seed))

    def __repr__(self):
        return f"EntropySource(seed={self.seed}, bias={self.bias}, label={self.label!r})"

    def draw_bits(self, n_bits: int) -> np.ndarray:
        if n_bits < 1:
            raise ValueError("n_bits must be >= 1")
        if self.bias == 0.5:
            return self._rng.integers(0, 2, size=n_bits, dtype=np.uint8)
        return (self._rng.random(n_bits) < self.bias).astype(np.uint8)

    def fork(self, label: str = "") -> "EntropySource":
        """Independent child stream, deterministic given this stream's position."""
        child_seed = int(self._rng.integers(0, 1 << 63, dtype=np.int64))
        return EntropySource(child_seed, self.bias, label or f"{self.label}/fork")


class XorSource:
    """Bitwise XOR of several sources, as a single source."""

    def __init__(self, sources: Sequence):
        if not sources:
            raise ValueError("at least one source is required")
        self.sources = list(sources)

    def draw_bits(self, n_bits: int) -> np.ndarray:
        return xor_combine(self.sources, n_bits)


def draw_bits(source, n_bits: int) -> np.ndarray:
    return source.draw_bits(n_bits)


def xor_combine(sources: Sequence, n_bits: int) -> np.ndarray:
    if not sources:
        raise ValueError("at least one source is required")
    out = sources[0].draw_bits(n_bits).copy()
    for s in sources[1:]:
        out ^= s.draw_bits(n_bits)
    return out


def bits_to_int(bits) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def draw_int(source, n_bits: int) -> int:
    return bits_to_int(source.draw_bits(n_bits))


def draw_below(source, bound: int) -> int:
    """Uniform integer in [0, bound) by rejection over raw bits."""
    if bound < 1:
        raise ValueError("bound must be >= 1")
    if bound == 1:
        return 0
    width = (bound - 1).bit_length()
    while True:
        v = draw_int(source, width)
        if v < bound:
            return v


def piling_up_bias(biases: Sequence[float]) -> float:
    """Probability that the XOR of independent biased bits is 1."""
    prod = 1.0
    for b in biases:
        prod *= 1.0 - 2.0 * b
    return 0.5 - 0.5 * prod


@dataclass(frozen=True)
class CollisionEstimate:
    linear: float
    birthday: float


def collision_probability(n_prior: float, nonce_bits: int) -> CollisionEstimate:
    """Chance a fresh nonce matches one of ``n_prior`` earlier ones.

    ``linear`` is the simple n/2^bits estimate; ``birthday`` is the chance of
    any collision among n draws.
    """
    if nonce_bits > 256 or nonce_bits < 1:
        raise ValueError("nonce_bits must be in [1, 256]")
    space = 2.0 ** nonce_bits
    linear = min(1.0, n_prior / space)
    birthday = -math.expm1(-(float(n_prior) ** 2) / (2.0 * space))
    return CollisionEstimate(linear, birthday)


def prior_license_count(blocks_per_chip: float, chips: float, licenses_per_day: float,
                        years: float, days_per_year: int = 365) -> float:
    return blocks_per_chip * chips * licenses_per_day * years * days_per_year


def simulate_collisions(draws: int, nonce_bits: int, trials: int, seed: int) -> float:
    """Fraction of trials in which ``draws`` uniform nonces contain a repeat."""
    return kernels.collision_trials(seed, trials, draws, nonce_bits) / trials
