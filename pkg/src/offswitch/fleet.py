"""Fleets of chips wired to one authorizer, and the licensing/workload timeline."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import block_model as bm
from . import crypto, transport, variants
from .authorizer import AuthorizerError, AuthorizerKeyring, IssuancePolicy
from .chip import Chip, build_topology
from .entropy import EntropySource
from .types import BlockKind

DAY = 86_400
HOUR = 3_600


def substream(seed: int, name: str) -> int:
    """Named child seed; every random choice in a scenario hangs off one of these."""
    digest = hashlib.sha256(f"{seed}/{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class FleetSpec:
    chips: int = 2
    rows: int = 3
    cols: int = 3
    blocks_per_edge: int = 2
    mix: Tuple[Tuple[str, float], ...] = (("EcdsaTrng", 1.0),)
    schemes: Tuple[str, ...] = ("EcdsaP256",)
    batches: int = 1
    shared_symmetric_key: bool = False
    preshared_bits: int = variants.DEFAULT_PRESHARED_BITS
    challenge_bits: int = variants.DEFAULT_CHALLENGE_BITS
    antifuse_capacity: int = variants.DEFAULT_ANTIFUSE_CAPACITY
    ungated_edges: Tuple[Tuple[str, str], ...] = ()

    def kind_fractions(self) -> List[Tuple[BlockKind, float]]:
        return [(BlockKind.parse(name), frac) for name, frac in self.mix]


@dataclass
class Fleet:
    chips: List[Chip]
    keyring: AuthorizerKeyring
    policy: IssuancePolicy
    shares: Tuple[str, ...]
    entropy: EntropySource
    spec: FleetSpec = field(default_factory=FleetSpec)

    def chip(self, chip_id: int) -> Chip:
        for c in self.chips:
            if c.chip_id == chip_id:
                return c
        raise KeyError(chip_id)

    def all_states(self):
        for c in self.chips:
            for idx in sorted(c.states):
                yield c, idx, c.states[idx]


def _assign_kinds(n: int, fractions: Sequence[Tuple[BlockKind, float]], rng: np.random.Generator) -> List[BlockKind]:
    """Exact counts by largest remainder, then shuffled."""
    raw = [(k, f * n) for k, f in fractions]
    counts = {k: int(x) for k, x in raw}
    rest = n - sum(counts.values())
    for k, x in sorted(raw, key=lambda kx: (-(kx[1] - int(kx[1])), kx[0].value))[:rest]:
        counts[k] += 1
    kinds = [k for k, _ in fractions for _ in range(counts[k])]
    return [kinds[i] for i in rng.permutation(len(kinds))]


def build_fleet(spec: FleetSpec, policy: IssuancePolicy, seed: int, keyring: Optional[AuthorizerKeyring] = None,
                shares: Optional[Sequence[str]] = None, backups: int = 1) -> Fleet:
    keyring = keyring or AuthorizerKeyring()
    shares = tuple(shares) if shares is not None else keyring.holders[: keyring.m]
    schemes = [crypto.Scheme.parse(s) for s in spec.schemes]
    for b in range(spec.batches):
        if b not in keyring.batch_ids:
            keyring.provision_batch(b, schemes[0], substream(seed, f"batch{b}/{schemes[0].value}"), backups)
            for s in schemes[1:]:
                keyring.add_scheme(b, s, substream(seed, f"batch{b}/{s.value}"))
    rng = np.random.Generator(np.random.PCG64(substream(seed, "fleet")))
    shared_key = crypto.symmetric_key_from_seed(0, substream(seed, "shared-aes"), unique_per_block=False)
    chips = []
    key_counter = 0
    for c in range(spec.chips):
        batch = c % spec.batches
        topo = build_topology(spec.rows, spec.cols, spec.blocks_per_edge, substream(seed, f"topology{c}"),
                              chip_id=c, ungated=spec.ungated_edges)
        block_ids = topo.block_ids
        kinds = _assign_kinds(len(block_ids), spec.kind_fractions(), rng)
        # alternate signature schemes along each link so every link carries them all
        scheme_of = {}
        for e in topo.edges:
            for j, b in enumerate(topo.gate_map[e]):
                scheme_of[b] = schemes[j % len(schemes)]
        states: Dict[int, bm.SecurityBlockState] = {}
        for block, kind in zip(block_ids, kinds):
            extra = {}
            if kind in (BlockKind.ECDSA_TRNG, BlockKind.COUNTER_NONCE):
                verifier = keyring.public_key(batch, scheme_of[block])
                keyring.register_block_scheme(block, scheme_of[block])
                extra["antifuse_capacity"] = spec.antifuse_capacity
            elif kind is BlockKind.SYMMETRIC_MAC:
                if spec.shared_symmetric_key:
                    verifier = shared_key
                else:
                    key_counter += 1
                    verifier = crypto.symmetric_key_from_seed(key_counter, substream(seed, f"aes/{block}"))
                keyring.register_symmetric(block, verifier)
            else:
                verifier = variants.PresharedSecret.random(spec.preshared_bits, rng)
                keyring.register_preshared(block, verifier)
                extra["challenge_bits"] = spec.challenge_bits
                extra["preshared_grant"] = policy.grant_ops
            config = bm.BlockConfig(block, kind, verifier, batch_id=batch, **extra)
            states[block.index] = bm.power_on(config)
        chips.append(Chip(topo, states, batch))
    entropy = EntropySource(substream(seed, "trng"), label="fleet-trng")
    return Fleet(chips, keyring, policy, shares, entropy, spec)


@dataclass
class RoundStats:
    nonces: int = 0
    issued: int = 0
    accepted: int = 0
    rejected: Dict[str, int] = field(default_factory=dict)
    lost: int = 0
    refused: int = 0
    nonce_bytes: int = 0
    license_bytes: int = 0

    def add(self, other: "RoundStats"):
        self.nonces += other.nonces
        self.issued += other.issued
        self.accepted += other.accepted
        self.lost += other.lost
        self.refused += other.refused
        self.nonce_bytes += other.nonce_bytes
        self.license_bytes += other.license_bytes
        for k, v in other.rejected.items():
            self.rejected[k] = self.rejected.get(k, 0) + v


def license_round(fleet: Fleet, clock: int, channel: Optional[transport.ChannelModel] = None,
                  captured: Optional[list] = None) -> RoundStats:
    """One collect -> authorize -> deliver exchange for every chip.

    Bundles cross the channel in their encoded form. A lost message means the
    chip's blocks keep their pending nonces and wait for the next round.
    Delivered licenses are appended to ``captured`` when given, as an
    eavesdropper on the collector link would see them.
    """
    stats = RoundStats()
    for chip in fleet.chips:
        bundle, _ = transport.collector_gather(chip, fleet.entropy, clock)
        wire = transport.encode_nonce_bundle(bundle)
        stats.nonces += len(bundle.records)
        stats.nonce_bytes += len(wire)
        at = clock
        if channel is not None:
            sent = transport.transmit(channel, wire, clock)
            if isinstance(sent, transport.Lost):
                stats.lost += 1
                continue
            at = sent.at
        try:
            licenses = fleet.keyring.issue_licenses(fleet.policy, transport.decode_nonce_bundle(wire), int(at),
                                                    fleet.shares, chip.batch_id)
        except AuthorizerError:
            stats.refused += 1
            continue
        reply = transport.encode_license_bundle(licenses)
        stats.issued += len(licenses.records)
        stats.license_bytes += len(reply)
        if channel is not None:
            back = transport.transmit(channel, reply, at)
            if isinstance(back, transport.Lost):
                stats.lost += 1
                continue
            at = back.at
        received = transport.decode_license_bundle(reply)
        if captured is not None:
            captured.extend(received.licenses())
        delivered = transport.deliver_licenses(chip, received, int(at))
        stats.accepted += delivered.accepted
        for k, v in delivered.rejected.items():
            stats.rejected[k] = stats.rejected.get(k, 0) + v
    return stats


@dataclass
class Timeline:
    halted_at: Dict[int, Optional[int]]
    licensing: RoundStats
    ops_executed: int = 0
    ops_granted: int = 0

    @property
    def halted_fraction(self) -> float:
        if not self.halted_at:
            return 0.0
        return sum(1 for t in self.halted_at.values() if t is not None) / len(self.halted_at)


def simulate(fleet: Fleet, days: float, channel: Optional[transport.ChannelModel] = None,
             cadence: int = DAY, tick: int = HOUR, events: Sequence[Tuple[int, object]] = (),
             captured: Optional[list] = None) -> Timeline:
    """Run licensing rounds every ``cadence`` seconds and one workload sweep per tick.

    Licensing at time t happens before the sweep of the tick that starts at t;
    the sweep itself runs mid-tick. ``events`` are (time, callable(fleet)) hooks
    fired at the start of the tick containing that time (e.g. key destruction).
    """
    halted_at: Dict[int, Optional[int]] = {c.chip_id: None for c in fleet.chips}
    total = RoundStats()
    pending_events = sorted(events, key=lambda e: e[0])
    executed = 0
    granted_before = sum(s.allowance for _, _, s in fleet.all_states())
    granted = granted_before
    end = int(days * DAY)
    for start in range(0, end, tick):
        while pending_events and pending_events[0][0] < start + tick:
            _, hook = pending_events.pop(0)
            hook(fleet)
        if start % cadence == 0:
            before = sum(s.allowance for _, _, s in fleet.all_states())
            total.add(license_round(fleet, start, channel, captured))
            granted += sum(s.allowance for _, _, s in fleet.all_states()) - before
        for chip in fleet.chips:
            before = sum(s.allowance for s in chip.states.values())
            if chip.sweep() and halted_at[chip.chip_id] is None:
                halted_at[chip.chip_id] = start + tick // 2
            executed += before - sum(s.allowance for s in chip.states.values())
    return Timeline(halted_at, total, executed, granted)
