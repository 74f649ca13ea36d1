"""Exhaustive small-trace checking of the block state machine.

Every operation sequence up to a given length over the alphabet below is
covered. Traces that reach configurations identical up to renaming of nonce
values are merged (nonces are compared only for equality, so renaming cannot
change any future step) and carried with a multiplicity, which keeps the
exact number of traces covered while running the real block code on one
representative per class.

Alphabet::

    P  power cycle              C  issue a challenge
    Q  authorizer signs a license for the pending nonce (captured, not applied)
    A  apply the newest captured license
    R  replay every captured license, oldest first
    F  apply a forged license for the pending nonce
    X  apply an expired, correctly issued license
    E  execute one gated operation
    G  trip the glitch detector
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import block_model as bm
from . import crypto, variants
from .types import BlockId, BlockKind, License

ALPHABET = "PCQARFXEG"
GRANT = 2
CLOCK = 1_000
VALID_EXPIRY = 2_000


class _HashStream:
    """Deterministic bit stream keyed by a counter; one per challenge."""

    def __init__(self, key: int):
        self.key = key
        self.block = 0

    def draw_bits(self, n_bits: int) -> np.ndarray:
        out = []
        while len(out) < n_bits:
            digest = hashlib.sha256(b"mc/%d/%d" % (self.key, self.block)).digest()
            self.block += 1
            out.extend(np.unpackbits(np.frombuffer(digest, dtype=np.uint8)).tolist())
        return np.asarray(out[:n_bits], dtype=np.uint8)


@dataclass
class _Issuer:
    """Authorizer-side material matching one block, plus an attacker's wrong key."""

    kind: BlockKind
    config: bm.BlockConfig
    keypair: Optional[crypto.SigningKeypair] = None
    symmetric: Optional[crypto.SymmetricKey] = None
    wrong_keypair: Optional[crypto.SigningKeypair] = None
    wrong_symmetric: Optional[crypto.SymmetricKey] = None

    def license(self, nonce, expiry: int, forged: bool = False) -> License:
        block = self.config.id
        grant = self.config.preshared_grant if self.kind is BlockKind.PRESHARED_BITS else GRANT
        unsigned = License(block, nonce.value, grant, expiry, b"\x00", self.config.batch_id)
        payload = unsigned.payload()
        if self.kind in (BlockKind.ECDSA_TRNG, BlockKind.COUNTER_NONCE):
            pair = self.wrong_keypair if forged else self.keypair
            proof = crypto.sign_license(pair, payload)
        elif self.kind is BlockKind.SYMMETRIC_MAC:
            proof = crypto.mac_tag(self.wrong_symmetric if forged else self.symmetric, payload)
        else:
            secret = self.config.verifier
            bits = [secret.bit(p) for p in nonce.positions]
            if forged:
                bits[0] ^= 1
            proof = variants.pack_payload(bits)
        return License(block, nonce.value, grant, expiry, proof, self.config.batch_id)


def make_issuer(kind: BlockKind, seed: int = 7) -> _Issuer:
    block = BlockId(1, 0)
    if kind in (BlockKind.ECDSA_TRNG, BlockKind.COUNTER_NONCE):
        pair = crypto.generate_keypair(crypto.Scheme.ECDSA_P256, seed)
        config = bm.BlockConfig(block, kind, pair.public)
        return _Issuer(kind, config, keypair=pair,
                       wrong_keypair=crypto.generate_keypair(crypto.Scheme.ECDSA_P256, seed + 1))
    if kind is BlockKind.SYMMETRIC_MAC:
        key = crypto.symmetric_key_from_seed(0, seed)
        config = bm.BlockConfig(block, kind, key)
        return _Issuer(kind, config, symmetric=key, wrong_symmetric=crypto.symmetric_key_from_seed(1, seed + 1))
    secret = variants.PresharedSecret.random(64, np.random.Generator(np.random.PCG64(seed)))
    config = bm.BlockConfig(block, kind, secret, challenge_bits=8, preshared_grant=GRANT)
    return _Issuer(kind, config)


@dataclass
class _Config:
    state: bm.SecurityBlockState
    captured: Tuple[License, ...] = ()
    slack: int = 0  # granted - executed
    challenges: int = 0
    accepted: frozenset = frozenset()
    trace: str = ""

    def key(self):
        pending = self.state.pending_nonce
        live = [pending is not None and lic.nonce_echo == pending.value for lic in self.captured]
        newest = "none" if not live else ("live" if live[-1] else "stale")
        return (self.state.allowance, pending is None, self.state.glitch_detector_tripped,
                self.slack, newest, any(live), not all(live) if live else False)


@dataclass
class CheckResult:
    kind: BlockKind
    max_length: int
    traces_checked: int = 0
    classes_explored: int = 0
    counterexamples: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.counterexamples


def _apply(cfg: _Config, lic: License, must_reject: bool, problems: List[str]):
    try:
        new_state = bm.apply_license(cfg.state, lic, CLOCK)
    except bm.LicenseRejected:
        return cfg.state
    if must_reject:
        problems.append("forged or expired license accepted")
    if lic.nonce_echo in cfg.accepted:
        problems.append("license accepted twice")
    cfg.accepted = cfg.accepted | {lic.nonce_echo}
    cfg.slack += lic.grant_ops
    return new_state


def step(cfg: _Config, op: str, issuer: _Issuer) -> Tuple[_Config, List[str]]:
    new = _Config(cfg.state, cfg.captured, cfg.slack, cfg.challenges, cfg.accepted, cfg.trace + op)
    problems: List[str] = []
    state = cfg.state
    pending = state.pending_nonce
    before = state.allowance
    if op == "P":
        new.state = bm.power_on(issuer.config, previous=state)
        if new.state.allowance != 0 or new.state.pending_nonce is not None:
            problems.append("power-on did not reset")
    elif op == "C":
        new.state, _ = bm.issue_challenge(state, _HashStream(cfg.challenges), CLOCK)
        new.challenges += 1
    elif op == "Q":
        if pending is not None:
            new.captured = cfg.captured + (issuer.license(pending, VALID_EXPIRY),)
    elif op == "A":
        if cfg.captured:
            new.state = _apply(new, cfg.captured[-1], False, problems)
    elif op == "R":
        for lic in cfg.captured:
            new.state = _apply(new, lic, False, problems)
    elif op == "F":
        if pending is not None:
            new.state = _apply(new, issuer.license(pending, VALID_EXPIRY, forged=True), True, problems)
    elif op == "X":
        if pending is not None:
            new.state = _apply(new, issuer.license(pending, CLOCK - 1), True, problems)
    elif op == "E":
        new.state, route = bm.execute_gated(state, 1)
        if before == 0:
            if route is not bm.HALT or new.state.allowance != 0:
                problems.append("operation ran at zero allowance")
        else:
            if route is bm.HALT or new.state.allowance != before - 1:
                problems.append("allowance did not decrement by exactly one")
            new.slack -= 1
    elif op == "G":
        new.state = bm.trip_glitch_detector(state)
        if new.state.allowance != 0:
            problems.append("glitch trip left allowance")
    else:
        raise ValueError(f"unknown op {op!r}")
    if op in "CQFX" and new.state.allowance != before:
        problems.append("allowance changed outside license/execute/trip")
    if new.slack < 0:
        problems.append("executed more operations than granted")
    if new.state.allowance > new.slack:
        problems.append("allowance exceeds granted minus executed")
    if new.state.allowance < 0:
        problems.append("negative allowance")
    return new, problems


def check_traces(kind: BlockKind = BlockKind.ECDSA_TRNG, max_length: int = 12,
                 alphabet: str = ALPHABET, max_counterexamples: int = 10) -> CheckResult:
    issuer = make_issuer(kind)
    result = CheckResult(kind, max_length)
    start = _Config(bm.power_on(issuer.config))
    frontier: Dict[tuple, Tuple[_Config, int]] = {start.key(): (start, 1)}
    result.traces_checked = 1
    for _ in range(max_length):
        nxt: Dict[tuple, Tuple[_Config, int]] = {}
        for cfg, mult in frontier.values():
            for op in alphabet:
                new, problems = step(cfg, op, issuer)
                for p in problems:
                    if len(result.counterexamples) < max_counterexamples:
                        result.counterexamples.append((new.trace, p))
                result.traces_checked += mult
                k = new.key()
                if k in nxt:
                    rep, m = nxt[k]
                    nxt[k] = (rep, m + mult)
                else:
                    nxt[k] = (new, mult)
        result.classes_explored += len(nxt)
        frontier = nxt
    return result
