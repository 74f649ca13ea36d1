"""Nonce/license bundle wire formats, the on-chip collector and channel outages.

All integers are fixed-width big-endian. Layouts::

    NonceBundle   "NBDL" u8 version u64 chip_id u16 count
                  record: u32 index, u8 kind, then
                          kinds 0-2: 16-byte nonce
                          kind 3:    u8 k, k * u16 positions
    LicenseBundle "LBDL" u8 version u64 chip_id u32 batch_id u16 count
                  record: u32 index, 16-byte nonce echo, u32 grant_ops,
                          u64 expiry, u16 proof_len, proof
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import block_model as bm
from .types import NONCE_BYTES, BlockId, BlockKind, License, positions_digest

NONCE_MAGIC = b"NBDL"
LICENSE_MAGIC = b"LBDL"
VERSION = 1

_NONCE_HEADER = struct.Struct(">4sBQH")
_LICENSE_HEADER = struct.Struct(">4sBQIH")
_NONCE_REC = struct.Struct(">IB")
_LICENSE_REC = struct.Struct(">I16sIQH")


class BundleError(ValueError):
    code = "bundle_error"


class BadMagic(BundleError):
    code = "bad_magic"


class BadVersion(BundleError):
    code = "bad_version"


class Truncated(BundleError):
    code = "truncated"


class CountMismatch(BundleError):
    code = "count_mismatch"


@dataclass(frozen=True)
class NonceRecord:
    index: int
    kind: int
    nonce_value: int = 0
    positions: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.kind == BlockKind.PRESHARED_BITS:
            if self.positions is None or len(self.positions) > 255:
                raise ValueError("pre-shared record needs at most 255 positions")
            object.__setattr__(self, "nonce_value", positions_digest(tuple(self.positions)))


@dataclass(frozen=True)
class NonceBundle:
    chip_id: int
    records: Tuple[NonceRecord, ...] = ()


@dataclass(frozen=True)
class LicenseRecord:
    index: int
    nonce_echo: int
    grant_ops: int
    expiry: int
    proof: bytes


@dataclass(frozen=True)
class LicenseBundle:
    chip_id: int
    batch_id: int
    records: Tuple[LicenseRecord, ...] = ()

    def licenses(self) -> List[License]:
        return [License(BlockId(self.chip_id, r.index), r.nonce_echo, r.grant_ops, r.expiry, r.proof, self.batch_id)
                for r in self.records]


def encode_nonce_bundle(bundle: NonceBundle) -> bytes:
    if len(bundle.records) > 0xFFFF:
        raise ValueError("too many records for a u16 count")
    out = [_NONCE_HEADER.pack(NONCE_MAGIC, VERSION, bundle.chip_id, len(bundle.records))]
    for rec in bundle.records:
        out.append(_NONCE_REC.pack(rec.index, rec.kind))
        if rec.kind == BlockKind.PRESHARED_BITS:
            out.append(struct.pack(f">B{len(rec.positions)}H", len(rec.positions), *rec.positions))
        else:
            out.append(rec.nonce_value.to_bytes(NONCE_BYTES, "big"))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise Truncated(f"need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        chunk = bytes(self.data[self.pos:self.pos + n])
        self.pos += n
        return chunk

    def unpack(self, st: struct.Struct):
        return st.unpack(self.take(st.size))

    def done(self) -> bool:
        return self.pos == len(self.data)


def _check_header(r: _Reader, magic: bytes):
    head = bytes(r.data[:4])
    if head != magic[: len(head)]:
        raise BadMagic(head.hex())
    if len(head) < 4:
        raise Truncated("header")
    if len(r.data) >= 5 and r.data[4] != VERSION:
        raise BadVersion(f"version {r.data[4]}")


def decode_nonce_bundle(data: bytes) -> NonceBundle:
    r = _Reader(data)
    _check_header(r, NONCE_MAGIC)
    _, _, chip_id, count = r.unpack(_NONCE_HEADER)
    records = []
    for _ in range(count):
        index, kind = r.unpack(_NONCE_REC)
        if kind > BlockKind.PRESHARED_BITS:
            raise BundleError(f"unknown block kind {kind}")
        if kind == BlockKind.PRESHARED_BITS:
            (k,) = r.take(1)
            positions = struct.unpack(f">{k}H", r.take(2 * k))
            records.append(NonceRecord(index, kind, positions=tuple(positions)))
        else:
            records.append(NonceRecord(index, kind, int.from_bytes(r.take(NONCE_BYTES), "big")))
    if not r.done():
        raise CountMismatch(f"{len(r.data) - r.pos} trailing bytes after {count} records")
    return NonceBundle(chip_id, tuple(records))


def encode_license_bundle(bundle: LicenseBundle) -> bytes:
    if len(bundle.records) > 0xFFFF:
        raise ValueError("too many records for a u16 count")
    out = [_LICENSE_HEADER.pack(LICENSE_MAGIC, VERSION, bundle.chip_id, bundle.batch_id, len(bundle.records))]
    for rec in bundle.records:
        if len(rec.proof) > 0xFFFF:
            raise ValueError("proof too long")
        out.append(_LICENSE_REC.pack(rec.index, rec.nonce_echo.to_bytes(NONCE_BYTES, "big"), rec.grant_ops,
                                     rec.expiry, len(rec.proof)))
        out.append(rec.proof)
    return b"".join(out)


def decode_license_bundle(data: bytes) -> LicenseBundle:
    r = _Reader(data)
    _check_header(r, LICENSE_MAGIC)
    _, _, chip_id, batch_id, count = r.unpack(_LICENSE_HEADER)
    records = []
    for _ in range(count):
        index, echo, grant, expiry, plen = r.unpack(_LICENSE_REC)
        proof = r.take(plen)
        records.append(LicenseRecord(index, int.from_bytes(echo, "big"), grant, expiry, proof))
    if not r.done():
        raise CountMismatch(f"{len(r.data) - r.pos} trailing bytes after {count} records")
    return LicenseBundle(chip_id, batch_id, tuple(records))


def nonce_bundle_size(kind_counts: Dict[int, int], k: int = 50) -> int:
    """Encoded size in bytes, from the layout alone."""
    size = _NONCE_HEADER.size
    for kind, n in kind_counts.items():
        per = _NONCE_REC.size + (1 + 2 * k if kind == BlockKind.PRESHARED_BITS else NONCE_BYTES)
        size += n * per
    return size


# -- collector ----------------------------------------------------------------


@dataclass
class GatherStats:
    issued: int = 0
    skipped_disabled: int = 0
    failed: int = 0


def collector_gather(chip, entropy, clock: int = 0) -> Tuple[NonceBundle, GatherStats]:
    """Challenge every enabled block, in ascending index order.

    Updates ``chip.states`` in place (the collector owns the chip while it runs).
    """
    stats = GatherStats()
    records = []
    for idx in sorted(chip.states):
        state = chip.states[idx]
        if state.disabled_by_edit:
            stats.skipped_disabled += 1
            continue
        try:
            state, nonce = bm.issue_challenge(state, entropy, clock)
        except Exception:
            # exhausted antifuses or a dead programming-voltage source
            stats.failed += 1
            continue
        chip.states[idx] = state
        records.append(NonceRecord(idx, int(state.kind), nonce.value, nonce.positions))
        stats.issued += 1
    return NonceBundle(chip.chip_id, tuple(records)), stats


@dataclass
class DeliveryStats:
    accepted: int = 0
    rejected: Dict[str, int] = None

    def __post_init__(self):
        if self.rejected is None:
            self.rejected = {}


def deliver_licenses(chip, bundle: LicenseBundle, clock: int) -> DeliveryStats:
    """Hand each license to the block it names. Blocks decide; the collector is untrusted."""
    stats = DeliveryStats()
    for lic in bundle.licenses():
        idx = lic.block.index
        if lic.block.chip_id != chip.chip_id or idx not in chip.states:
            stats.rejected["unknown_block"] = stats.rejected.get("unknown_block", 0) + 1
            continue
        try:
            chip.states[idx] = bm.apply_license(chip.states[idx], lic, clock)
            stats.accepted += 1
        except bm.LicenseRejected as exc:
            stats.rejected[exc.reason] = stats.rejected.get(exc.reason, 0) + 1
    return stats


# -- channel ------------------------------------------------------------------


@dataclass(frozen=True)
class Delivered:
    at: float


@dataclass(frozen=True)
class Lost:
    reason: str


class ChannelModel:
    def __init__(self, outages: Sequence[Tuple[float, float]] = (), loss_probability: float = 0.0,
                 latency: float = 0.0, seed: int = 0):
        windows = sorted((float(a), float(b)) for a, b in outages)
        for a, b in windows:
            if b < a:
                raise ValueError(f"outage window ({a}, {b}) ends before it starts")
        for (_, b1), (a2, _) in zip(windows, windows[1:]):
            if a2 < b1:
                raise ValueError("outage windows overlap")
        if not 0.0 <= loss_probability <= 1.0:
            raise ValueError("loss_probability must lie in [0, 1]")
        self.outages = tuple(windows)
        self.loss_probability = loss_probability
        self.latency = latency
        self._rng = np.random.Generator(np.random.PCG64(seed))

    def in_outage(self, t: float) -> bool:
        return any(a <= t < b for a, b in self.outages)


def transmit(channel: ChannelModel, message, clock: float):
    if channel.in_outage(clock):
        return Lost("outage")
    if channel.loss_probability > 0 and channel._rng.random() < channel.loss_probability:
        return Lost("loss")
    return Delivered(clock + channel.latency)
