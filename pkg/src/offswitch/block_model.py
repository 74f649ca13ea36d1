"""Security block deadman's switch.

A block's state is an immutable value; every operation returns a new state.
Rejections raise, so a rejected license leaves the caller holding the old,
unchanged state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional, Tuple, Union

from . import crypto, variants
from .entropy import draw_int
from .types import NONCE_BITS, U64_MAX, BlockId, BlockKind, License, Nonce, positions_digest


class BlockError(Exception):
    pass


class BlockDisabled(BlockError):
    pass


class ConfigError(BlockError, ValueError):
    pass


class LicenseRejected(BlockError):
    reason = "rejected"


class NoPendingNonce(LicenseRejected):
    reason = "no_pending_nonce"


class NonceMismatch(LicenseRejected):
    reason = "nonce_mismatch"


class BadProof(LicenseRejected):
    reason = "bad_proof"


class Expired(LicenseRejected):
    reason = "expired"


class Route(enum.Enum):
    LEFT = 0
    RIGHT = 1
    HALT = "halt"


HALT = Route.HALT

Verifier = Union[crypto.PublicKey, crypto.SymmetricKey, variants.PresharedSecret]


@dataclass(frozen=True)
class BlockConfig:
    """What is fixed at manufacture: identity, kind and verifier material."""

    id: BlockId
    kind: BlockKind
    verifier: Verifier
    batch_id: int = 0
    antifuse_capacity: int = variants.DEFAULT_ANTIFUSE_CAPACITY
    challenge_bits: int = variants.DEFAULT_CHALLENGE_BITS
    # pre-shared licenses cannot authenticate the grant, so it is hardwired
    preshared_grant: int = 1
    response_delay: float = 1.0


@dataclass(frozen=True)
class SecurityBlockState:
    config: BlockConfig
    allowance: int = 0
    pending_nonce: Optional[Nonce] = None
    glitch_detector_tripped: bool = False
    disabled_by_edit: bool = False
    antifuse: Optional[variants.AntifuseArray] = None
    voltage_available: bool = True

    @property
    def id(self) -> BlockId:
        return self.config.id

    @property
    def kind(self) -> BlockKind:
        return self.config.kind

    @property
    def remaining_ops(self) -> int:
        return self.allowance


def _check_config(config: BlockConfig):
    v = config.verifier
    kind = config.kind
    if kind in (BlockKind.ECDSA_TRNG, BlockKind.COUNTER_NONCE):
        if not isinstance(v, crypto.PublicKey) or not v.data:
            raise ConfigError(f"{kind.label} block needs a public key")
    elif kind is BlockKind.SYMMETRIC_MAC:
        if not isinstance(v, crypto.SymmetricKey):
            raise ConfigError("SymmetricMac block needs a 256-bit symmetric key")
    elif kind is BlockKind.PRESHARED_BITS:
        if not isinstance(v, variants.PresharedSecret) or v.n < 1:
            raise ConfigError("PresharedBits block needs a pre-shared secret")
        if not 1 <= config.challenge_bits <= min(v.n, 255):
            raise ConfigError("challenge_bits must be in [1, min(N, 255)]")
        if not 0 < config.preshared_grant < 1 << 32:
            raise ConfigError("preshared_grant must be a positive 32-bit count")


def power_on(block_config: BlockConfig, previous: Optional[SecurityBlockState] = None) -> SecurityBlockState:
    """Fresh state with zero allowance. Only the antifuse array survives a reset."""
    _check_config(block_config)
    antifuse = None
    if block_config.kind is BlockKind.COUNTER_NONCE:
        if previous is not None and previous.antifuse is not None:
            antifuse = previous.antifuse
        else:
            antifuse = variants.AntifuseArray(block_config.antifuse_capacity)
    disabled = previous.disabled_by_edit if previous is not None else False
    voltage = previous.voltage_available if previous is not None else True
    return SecurityBlockState(block_config, antifuse=antifuse, disabled_by_edit=disabled,
                              voltage_available=voltage)


def issue_challenge(state: SecurityBlockState, entropy_source, clock: int = 0) -> Tuple[SecurityBlockState, Nonce]:
    """Generate a nonce and make it the (single) pending one."""
    if state.disabled_by_edit:
        raise BlockDisabled(str(state.id))
    kind = state.kind
    if kind is BlockKind.COUNTER_NONCE:
        antifuse, value = variants.counter_nonce_next(state.id, state.antifuse, state.voltage_available)
        nonce = Nonce(state.id, value, clock)
        return replace(state, antifuse=antifuse, pending_nonce=nonce), nonce
    if kind is BlockKind.PRESHARED_BITS:
        challenge = variants.preshared_challenge(state.config.verifier.n, entropy_source,
                                                 state.config.challenge_bits)
        nonce = Nonce(state.id, positions_digest(challenge.positions), clock, challenge.positions)
        return replace(state, pending_nonce=nonce), nonce
    nonce = Nonce(state.id, draw_int(entropy_source, NONCE_BITS), clock)
    return replace(state, pending_nonce=nonce), nonce


def verify_proof(state: SecurityBlockState, license: License) -> bool:
    """Check the license proof under the block's verifier material only."""
    config = state.config
    if license.batch_id != config.batch_id:
        return False
    kind = config.kind
    if kind in (BlockKind.ECDSA_TRNG, BlockKind.COUNTER_NONCE):
        return crypto.verify_signature(config.verifier, license.payload(), license.proof)
    if kind is BlockKind.SYMMETRIC_MAC:
        return crypto.mac_verify(config.verifier, license.payload(), license.proof)
    pending = state.pending_nonce
    if pending is None or pending.positions is None or license.grant_ops != config.preshared_grant:
        return False
    try:
        bits = variants.unpack_payload(license.proof, len(pending.positions))
        ok, _ = variants.preshared_verify(config.verifier, variants.BitChallengeNonce(pending.positions),
                                          bits, config.response_delay)
    except ValueError:
        return False
    return ok


def credit(state: SecurityBlockState, grant_ops: int) -> SecurityBlockState:
    """Add an accepted grant (saturating) and re-arm the glitch detector."""
    allowance = min(U64_MAX, state.allowance + grant_ops)
    return replace(state, allowance=allowance, pending_nonce=None, glitch_detector_tripped=False)


def apply_license(state: SecurityBlockState, license: License, clock: int) -> SecurityBlockState:
    pending = state.pending_nonce
    if pending is None:
        raise NoPendingNonce(str(state.id))
    if license.block != state.id or license.nonce_echo != pending.value:
        raise NonceMismatch(str(state.id))
    if not verify_proof(state, license):
        raise BadProof(str(state.id))
    if clock > license.expiry:
        raise Expired(f"{state.id}: clock {clock} > expiry {license.expiry}")
    return credit(state, license.grant_ops)


def execute_gated(state: SecurityBlockState, essential_input: int) -> Tuple[SecurityBlockState, Route]:
    """Run the block's routing switch once: bit 0 goes LEFT, bit 1 goes RIGHT.

    An edited-out block always passes; otherwise zero allowance means HALT.
    """
    route = Route.RIGHT if essential_input & 1 else Route.LEFT
    if state.disabled_by_edit:
        return state, route
    if state.allowance == 0:
        return state, HALT
    return replace(state, allowance=state.allowance - 1), route


def trip_glitch_detector(state: SecurityBlockState) -> SecurityBlockState:
    return replace(state, allowance=0, glitch_detector_tripped=True)


def disable_by_edit(state: SecurityBlockState) -> SecurityBlockState:
    return replace(state, disabled_by_edit=True, pending_nonce=None)
