"""Identifiers and messages shared by blocks, the authorizer and the wire codecs."""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass
from typing import Optional, Tuple

NONCE_BITS = 128
NONCE_BYTES = NONCE_BITS // 8
U64_MAX = (1 << 64) - 1

# batch_id, chip_id, block index, nonce echo, grant_ops, expiry
_PAYLOAD = struct.Struct(">IQI16sIQ")


class BlockKind(enum.IntEnum):
    """Security block variant; the integer value is the wire code."""

    ECDSA_TRNG = 0
    COUNTER_NONCE = 1
    SYMMETRIC_MAC = 2
    PRESHARED_BITS = 3

    @classmethod
    def parse(cls, name: str) -> "BlockKind":
        key = name.replace("_", "").replace("-", "").lower()
        for kind in cls:
            if kind.name.replace("_", "").lower() == key:
                return kind
        raise ValueError(f"unknown block kind {name!r}")

    @property
    def label(self) -> str:
        return "".join(part.capitalize() for part in self.name.split("_"))


@dataclass(frozen=True, order=True)
class BlockId:
    chip_id: int
    index: int

    def __post_init__(self):
        if not 0 <= self.chip_id <= U64_MAX:
            raise ValueError("chip_id must fit in 64 bits")
        if not 0 <= self.index < 1 << 32:
            raise ValueError("block index must fit in 32 bits")

    def __str__(self) -> str:
        return f"{self.chip_id}:{self.index}"


def positions_digest(positions: Tuple[int, ...]) -> int:
    """128-bit echo value standing in for a bit-position challenge."""
    raw = b"".join(p.to_bytes(2, "big") for p in positions)
    return int.from_bytes(hashlib.sha256(b"preshared-challenge" + raw).digest()[:NONCE_BYTES], "big")


@dataclass(frozen=True)
class Nonce:
    """A challenge issued by one block.

    ``positions`` is set only for pre-shared-bits blocks, where ``value`` is
    the digest of the position list.
    """

    block: BlockId
    value: int
    issued_at: int = 0
    positions: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if not 0 <= self.value < 1 << NONCE_BITS:
            raise ValueError("nonce value must fit in 128 bits")

    @property
    def value_bytes(self) -> bytes:
        return self.value.to_bytes(NONCE_BYTES, "big")


@dataclass(frozen=True)
class License:
    block: BlockId
    nonce_echo: int
    grant_ops: int
    expiry: int
    proof: bytes
    batch_id: int = 0

    def __post_init__(self):
        if not 0 < self.grant_ops < 1 << 32:
            raise ValueError("grant_ops must be a positive 32-bit count")
        if not 0 <= self.expiry <= U64_MAX:
            raise ValueError("expiry must fit in 64 bits")
        if not 0 <= self.nonce_echo < 1 << NONCE_BITS:
            raise ValueError("nonce echo must fit in 128 bits")

    def payload(self) -> bytes:
        return license_payload(self.batch_id, self.block, self.nonce_echo, self.grant_ops, self.expiry)


def license_payload(batch_id: int, block: BlockId, nonce_echo: int, grant_ops: int, expiry: int) -> bytes:
    """Canonical signed message: fixed-width big-endian fields, 44 bytes."""
    return _PAYLOAD.pack(
        batch_id, block.chip_id, block.index, nonce_echo.to_bytes(NONCE_BYTES, "big"), grant_ops, expiry
    )
