"""Pure-Python kernels. Must stay draw-for-draw identical to ``_ckernels.pyx``."""

import numpy as np

_M64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_INV53 = 1.0 / 9007199254740992.0


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed):
        self.state = seed & _M64

    def next(self):
        self.state = (self.state + _GAMMA) & _M64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        return z ^ (z >> 31)

    def uniform(self):
        return (self.next() >> 11) * _INV53


def glitch_trials(seed, trials, n_targets, p_flip, detector_p, coverage):
    rng = SplitMix64(seed)
    successes = 0
    trips = 0
    defeated = 0
    for _ in range(trials):
        ok = True
        for _ in range(n_targets):
            if coverage < 1.0 and rng.uniform() >= coverage:
                ok = False
                break
            if rng.uniform() >= p_flip:
                ok = False
                break
            if detector_p > 0.0 and rng.uniform() < detector_p:
                trips += 1
                ok = False
                break
            defeated += 1
        if ok:
            successes += 1
    return successes, trips, defeated


def forgery_attempts(seed, targets, widths, max_attempts):
    rng = SplitMix64(seed)
    n = len(targets)
    out = np.zeros(n, dtype=np.int64)
    for i in range(n):
        width = int(widths[i])
        mask = (1 << width) - 1 if width < 64 else _M64
        target = int(targets[i]) & mask
        attempts = 0
        while attempts < max_attempts:
            attempts += 1
            if rng.next() & mask == target:
                break
        out[i] = attempts
    return out


def edit_trials(seed, trials, n_edits, p_success, p_damage):
    rng = SplitMix64(seed)
    undamaged = 0
    unlocked = 0
    for _ in range(trials):
        bypassed_all = True
        damaged = False
        for _ in range(n_edits):
            if rng.uniform() >= p_success:
                bypassed_all = False
            if rng.uniform() < p_damage:
                damaged = True
        if not damaged:
            undamaged += 1
            if bypassed_all:
                unlocked += 1
    return undamaged, unlocked


def collision_trials(seed, trials, draws, bits):
    if not 1 <= bits <= 28:
        raise ValueError("bits must be in [1, 28]")
    rng = SplitMix64(seed)
    shift = 64 - bits
    hits = 0
    for _ in range(trials):
        seen = set()
        for _ in range(draws):
            v = rng.next() >> shift
            if v in seen:
                hits += 1
                break
            seen.add(v)
    return hits
