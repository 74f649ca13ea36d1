"""Alternative block designs: antifuse counter nonces and the pre-shared-bits scheme.

The symmetric-MAC design needs nothing beyond :mod:`offswitch.crypto`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from . import kernels
from .entropy import draw_below
from .types import BlockId

DEFAULT_ANTIFUSE_CAPACITY = 2000
DEFAULT_PRESHARED_BITS = 10_000
DEFAULT_CHALLENGE_BITS = 50


class AntifuseExhausted(Exception):
    pass


class ProgrammingVoltageUnavailable(Exception):
    """The shared high-voltage source needed to blow antifuses is disabled."""


@dataclass(frozen=True)
class AntifuseArray:
    capacity: int = DEFAULT_ANTIFUSE_CAPACITY
    bits: int = 0
    programmed_count: int = 0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")

    def is_set(self, i: int) -> bool:
        return bool(self.bits >> i & 1)

    def program(self, i: int) -> "AntifuseArray":
        if not 0 <= i < self.capacity:
            raise IndexError(i)
        return replace(self, bits=self.bits | (1 << i), programmed_count=max(self.programmed_count, i + 1))


def counter_nonce_value(block_id: BlockId, counter: int) -> int:
    """block_id || counter, laid out as chip(64) | index(32) | counter(32)."""
    return (block_id.chip_id << 64) | (block_id.index << 32) | counter


def counter_nonce_next(block_id: BlockId, antifuse: AntifuseArray,
                       voltage_available: bool = True) -> Tuple[AntifuseArray, int]:
    if antifuse.programmed_count >= antifuse.capacity:
        raise AntifuseExhausted(f"block {block_id}: all {antifuse.capacity} antifuse bits used")
    if not voltage_available:
        raise ProgrammingVoltageUnavailable(str(block_id))
    counter = antifuse.programmed_count
    return antifuse.program(counter), counter_nonce_value(block_id, counter)


# -- pre-shared bits ----------------------------------------------------------


@dataclass(frozen=True)
class PresharedSecret:
    """N secret bits plus the mask of positions already disclosed in licenses.

    Bit i of ``bits``/``revealed`` is position i.
    """

    n: int
    bits: int
    revealed: int = 0

    def bit(self, i: int) -> int:
        return self.bits >> i & 1

    @property
    def revealed_count(self) -> int:
        return bin(self.revealed).count("1")

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "PresharedSecret":
        raw = rng.integers(0, 2, size=n, dtype=np.uint8)
        return cls(n, int("".join(map(str, raw[::-1])), 2))


@dataclass(frozen=True)
class BitChallengeNonce:
    positions: Tuple[int, ...]

    def __post_init__(self):
        if len(set(self.positions)) != len(self.positions):
            raise ValueError("challenge positions must be distinct")

    @property
    def k(self) -> int:
        return len(self.positions)


def preshared_challenge(n: int, entropy_source, k: int = DEFAULT_CHALLENGE_BITS) -> BitChallengeNonce:
    """k distinct positions in [0, n), by partial Fisher-Yates over the TRNG."""
    if isinstance(n, PresharedSecret):
        n = n.n
    if k > n:
        raise ValueError(f"k={k} exceeds secret size {n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    pool = list(range(n))
    for i in range(k):
        j = i + draw_below(entropy_source, n - i)
        pool[i], pool[j] = pool[j], pool[i]
    return BitChallengeNonce(tuple(pool[:k]))


def _check_positions(n: int, challenge: BitChallengeNonce):
    if any(not 0 <= p < n for p in challenge.positions):
        raise ValueError("challenge position out of range")


def preshared_issue(authorizer_copy: PresharedSecret,
                    challenge: BitChallengeNonce) -> Tuple[Tuple[int, ...], PresharedSecret]:
    _check_positions(authorizer_copy.n, challenge)
    payload = tuple(authorizer_copy.bit(p) for p in challenge.positions)
    mask = authorizer_copy.revealed
    for p in challenge.positions:
        mask |= 1 << p
    return payload, replace(authorizer_copy, revealed=mask)


def preshared_verify(secret: PresharedSecret, challenge: BitChallengeNonce, payload,
                     response_delay: float = 1.0) -> Tuple[bool, float]:
    """Returns (accepted, simulated seconds consumed). Compares every bit."""
    if len(payload) != challenge.k:
        raise ValueError(f"payload has {len(payload)} bits, challenge asks for {challenge.k}")
    _check_positions(secret.n, challenge)
    diff = 0
    for p, b in zip(challenge.positions, payload):
        diff |= secret.bit(p) ^ (int(b) & 1)
    return diff == 0, response_delay


def pack_payload(payload) -> bytes:
    if not payload:
        return b""
    return bytes(np.packbits(np.asarray(payload, dtype=np.uint8)))


def unpack_payload(proof: bytes, k: int) -> Tuple[int, ...]:
    if len(proof) != (k + 7) // 8:
        raise ValueError("payload length does not match k")
    return tuple(int(b) for b in np.unpackbits(np.frombuffer(proof, dtype=np.uint8))[:k])


SECONDS_PER_YEAR = 365.25 * 86400


@dataclass(frozen=True)
class BruteForceEstimate:
    expected_guesses: float
    expected_seconds: float

    @property
    def years(self) -> float:
        return self.expected_seconds / SECONDS_PER_YEAR


def preshared_bruteforce_estimate(n: int, k: int, revealed_fraction: float,
                                  delay_seconds: float = 1.0) -> BruteForceEstimate:
    """Expected guesses 2^(k(1-f)); each guess costs one verification delay."""
    if not 0.0 <= revealed_fraction <= 1.0:
        raise ValueError("revealed_fraction must lie in [0, 1]")
    if k > n:
        raise ValueError("k exceeds n")
    guesses = 2.0 ** (k * (1.0 - revealed_fraction))
    return BruteForceEstimate(guesses, guesses * delay_seconds)


def revealed_after_licenses(n: int, k: int, licenses: int, rng: np.random.Generator) -> Tuple[int, float]:
    """(worst-case, simulated) count of revealed positions after ``licenses`` issues.

    Worst case assumes no position repeats; the simulated count includes repeats.
    """
    worst = min(n, licenses * k)
    mask = np.zeros(n, dtype=bool)
    for _ in range(licenses):
        mask[rng.choice(n, size=k, replace=False)] = True
    return worst, float(mask.sum())


def simulate_forgery(n: int, k: int, revealed_fraction: float, trials: int, seed: int,
                     max_attempts: int = 1 << 40) -> np.ndarray:
    """Attempts an attacker needs to forge one pre-shared license, per trial.

    Each trial draws a fresh secret, reveals round(f*n) random positions to the
    attacker and issues one k-bit challenge. The attacker answers revealed
    positions correctly and guesses the rest uniformly, retrying against the
    same pending challenge until accepted.
    """
    if k > 64:
        raise ValueError("simulation supports k <= 64")
    rng = np.random.Generator(np.random.PCG64(seed))
    n_revealed = int(round(revealed_fraction * n))
    targets = np.zeros(trials, dtype=np.uint64)
    widths = np.zeros(trials, dtype=np.int64)
    for t in range(trials):
        secret = rng.integers(0, 2, size=n, dtype=np.uint8)
        known = np.zeros(n, dtype=bool)
        known[rng.choice(n, size=n_revealed, replace=False)] = True
        positions = rng.choice(n, size=k, replace=False)
        unknown = [p for p in positions if not known[p]]
        value = 0
        for p in unknown:
            value = (value << 1) | int(secret[p])
        targets[t] = value
        widths[t] = len(unknown)
    kernel_seed = int(rng.integers(0, 1 << 63, dtype=np.int64))
    return kernels.forgery_attempts(kernel_seed, targets, widths, max_attempts)
