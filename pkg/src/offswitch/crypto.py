"""Proof schemes for license validation.

Two signature schemes (ECDSA over P-256 with deterministic nonces, and
Ed25519 as the alternate algorithm) and one symmetric scheme (AES-256 CMAC).
Verification never raises on bad input; it returns False.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
from contextlib import contextmanager
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import cmac, hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec, ed25519
from cryptography.hazmat.primitives.ciphers import algorithms

_P256_ORDER = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551
_ECDSA = ec.ECDSA(hashes.SHA256(), deterministic_signing=True)

MAC_TAG_BYTES = 16
SYMMETRIC_KEY_BYTES = 32


class Scheme(str, enum.Enum):
    ECDSA_P256 = "EcdsaP256"
    ED25519 = "Ed25519"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, Scheme):
            return value
        if value == "AltSignature":
            return cls.ED25519
        try:
            return cls(value)
        except ValueError:
            raise UnsupportedScheme(value) from None


class UnsupportedScheme(ValueError):
    pass


class MissingPrivateKey(ValueError):
    pass


@dataclass(frozen=True)
class PublicKey:
    """Verifier material embedded in a block (the Mask ROM contents)."""

    scheme: Scheme
    data: bytes

    def __post_init__(self):
        if not self.data:
            raise ValueError("empty public key")


@dataclass(frozen=True)
class SigningKeypair:
    scheme: Scheme
    public_part: bytes
    private_part: Optional[bytes] = field(default=None, repr=False)

    @property
    def public(self) -> PublicKey:
        return PublicKey(self.scheme, self.public_part)

    def without_private(self) -> "SigningKeypair":
        return SigningKeypair(self.scheme, self.public_part, None)


@dataclass(frozen=True)
class SymmetricKey:
    key_id: int
    secret: bytes = field(repr=False)
    unique_per_block: bool = True

    def __post_init__(self):
        if len(self.secret) != SYMMETRIC_KEY_BYTES:
            raise ValueError(f"symmetric key must be {SYMMETRIC_KEY_BYTES} bytes, got {len(self.secret)}")


# Every keypair ever generated, by public key. Only the broken-scheme oracle reads
# this: it stands in for an attacker able to invert a public key.
_RECOVERABLE: Dict[PublicKey, SigningKeypair] = {}
_BROKEN: set = set()


def _seed_material(tag: bytes, seed: int) -> bytes:
    return hashlib.sha256(b"offswitch-keygen/" + tag + b"/" + seed.to_bytes(16, "big", signed=True)).digest()


def generate_keypair(scheme_id, randomness_seed: int) -> SigningKeypair:
    scheme = Scheme.parse(scheme_id)
    material = _seed_material(scheme.value.encode(), randomness_seed)
    if scheme is Scheme.ECDSA_P256:
        scalar = int.from_bytes(material, "big") % (_P256_ORDER - 1) + 1
        private = scalar.to_bytes(32, "big")
        public = _ecdsa_private(private).public_key().public_bytes(
            serialization.Encoding.X962, serialization.PublicFormat.CompressedPoint
        )
    else:
        private = material
        public = ed25519.Ed25519PrivateKey.from_private_bytes(private).public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )
    pair = SigningKeypair(scheme, public, private)
    _RECOVERABLE[pair.public] = pair
    return pair


@lru_cache(maxsize=4096)
def _ecdsa_private(private: bytes):
    return ec.derive_private_key(int.from_bytes(private, "big"), ec.SECP256R1())


@lru_cache(maxsize=4096)
def _ed25519_private(private: bytes):
    return ed25519.Ed25519PrivateKey.from_private_bytes(private)


@lru_cache(maxsize=4096)
def _load_public(scheme: Scheme, data: bytes):
    if scheme is Scheme.ECDSA_P256:
        return ec.EllipticCurvePublicKey.from_encoded_point(ec.SECP256R1(), data)
    return ed25519.Ed25519PublicKey.from_public_bytes(data)


def sign_license(keypair: SigningKeypair, payload: bytes) -> bytes:
    if keypair.private_part is None:
        raise MissingPrivateKey("keypair has no private part")
    if keypair.scheme is Scheme.ECDSA_P256:
        return _ecdsa_private(keypair.private_part).sign(payload, _ECDSA)
    return _ed25519_private(keypair.private_part).sign(payload)


@lru_cache(maxsize=65536)
def _verify_cached(scheme: Scheme, data: bytes, payload: bytes, signature: bytes) -> bool:
    try:
        key = _load_public(scheme, data)
    except ValueError:
        return False
    try:
        if scheme is Scheme.ECDSA_P256:
            key.verify(signature, payload, _ECDSA)
        else:
            key.verify(signature, payload)
    except (InvalidSignature, ValueError):
        return False
    return True


def verify_signature(public: PublicKey, payload: bytes, signature: bytes) -> bool:
    if not isinstance(signature, (bytes, bytearray)) or not signature:
        return False
    return _verify_cached(public.scheme, bytes(public.data), bytes(payload), bytes(signature))


def mac_tag(key: SymmetricKey, payload: bytes) -> bytes:
    """AES-256 CMAC over the canonical payload."""
    c = cmac.CMAC(algorithms.AES(key.secret))
    c.update(payload)
    return c.finalize()


def mac_verify(key: SymmetricKey, payload: bytes, tag: bytes) -> bool:
    return hmac.compare_digest(mac_tag(key, payload), bytes(tag))


def symmetric_key_from_seed(key_id: int, seed: int, unique_per_block: bool = True) -> SymmetricKey:
    return SymmetricKey(key_id, _seed_material(b"aes256", seed), unique_per_block)


# -- broken-scheme oracle ---------------------------------------------------


class SchemeIntact(Exception):
    """Raised when the oracle is asked to forge for a scheme that is not broken."""


@contextmanager
def broken_schemes(schemes: Iterable):
    """Temporarily mark signature schemes as broken (e.g. by a quantum adversary)."""
    added = {Scheme.parse(s) for s in schemes} - _BROKEN
    _BROKEN.update(added)
    try:
        yield
    finally:
        _BROKEN.difference_update(added)


def is_broken(scheme) -> bool:
    return Scheme.parse(scheme) in _BROKEN


def forge_signature(public: PublicKey, payload: bytes) -> bytes:
    """Produce a valid signature without the private key, if the scheme is broken."""
    if public.scheme not in _BROKEN:
        raise SchemeIntact(public.scheme.value)
    pair = _RECOVERABLE.get(public)
    if pair is None:
        raise SchemeIntact(f"no recoverable key for {public.scheme.value}")
    return sign_license(pair, payload)
