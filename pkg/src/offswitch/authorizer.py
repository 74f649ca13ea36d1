"""Off-device license authority.

The :class:`AuthorizerKeyring` is the HSM boundary: private keys never leave
it except through :meth:`AuthorizerKeyring.steal_key`, which exists only to
stage key-theft scenarios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

from . import crypto, variants
from .transport import LicenseBundle, LicenseRecord
from .types import BlockId, BlockKind, License, license_payload


class AuthorizerError(Exception):
    pass


class DuplicateBatch(AuthorizerError):
    pass


class UnknownBatch(AuthorizerError, KeyError):
    pass


class UnknownShareHolder(AuthorizerError):
    pass


class KeysUnavailable(AuthorizerError):
    """The batch key and every backup have been destroyed."""


class QuorumRefused(AuthorizerError):
    def __init__(self, present: int, required: int):
        super().__init__(f"quorum refused: {present} of {required} shares present")
        self.present = present
        self.required = required


@dataclass(frozen=True)
class IssuancePolicy:
    """``grant_ops`` is the allowance for one full validity period.

    With ``top_up`` the authorizer tracks how far each block is already
    covered and only grants enough to extend coverage to now + validity, so a
    block never banks more than one validity period of runway.
    """

    grant_ops: int
    validity_period: int
    licenses_per_period: int = 1
    top_up: bool = False

    def __post_init__(self):
        if self.validity_period <= 0:
            raise ValueError("validity_period must be > 0")
        if self.grant_ops <= 0:
            raise ValueError("grant_ops must be > 0")


@dataclass
class _Batch:
    keys: Optional[Dict[crypto.Scheme, crypto.SigningKeypair]]
    backups: list
    default_scheme: crypto.Scheme

    def live_or_backup(self) -> Optional[Dict[crypto.Scheme, crypto.SigningKeypair]]:
        if self.keys is not None:
            return self.keys
        return self.backups[0] if self.backups else None


class AuthorizerKeyring:
    def __init__(self, quorum: Tuple[int, int] = (1, 1), holders: Optional[Sequence[str]] = None):
        m, n = quorum
        if not 1 <= m <= n:
            raise ValueError("quorum needs 1 <= m <= n")
        self.m = m
        self.holders = tuple(holders) if holders is not None else tuple(f"holder{i}" for i in range(n))
        if len(self.holders) != n or len(set(self.holders)) != n:
            raise ValueError("holders must be n distinct names")
        self._batches: Dict[int, _Batch] = {}
        self._symmetric: Dict[BlockId, crypto.SymmetricKey] = {}
        self._preshared: Dict[BlockId, variants.PresharedSecret] = {}
        self._block_scheme: Dict[BlockId, crypto.Scheme] = {}
        self._coverage: Dict[BlockId, int] = {}

    @property
    def n(self) -> int:
        return len(self.holders)

    # -- batches ----------------------------------------------------------------

    def provision_batch(self, batch_id: int, scheme_id, seed: int, backups: int = 1) -> crypto.PublicKey:
        """New batch key; returns the public part to burn into that batch's chips."""
        if batch_id in self._batches:
            raise DuplicateBatch(batch_id)
        if not 0 <= batch_id < 1 << 32:
            raise ValueError("batch_id must fit in 32 bits")
        pair = crypto.generate_keypair(scheme_id, seed)
        keys = {pair.scheme: pair}
        self._batches[batch_id] = _Batch(keys, [dict(keys) for _ in range(backups)], pair.scheme)
        return pair.public

    def add_scheme(self, batch_id: int, scheme_id, seed: int) -> crypto.PublicKey:
        """Second (third, ...) signature algorithm for an existing batch."""
        batch = self._batch(batch_id)
        pair = crypto.generate_keypair(scheme_id, seed)
        if batch.keys is None:
            raise KeysUnavailable(batch_id)
        batch.keys[pair.scheme] = pair
        for b in batch.backups:
            b[pair.scheme] = pair
        return pair.public

    def public_key(self, batch_id: int, scheme=None) -> crypto.PublicKey:
        batch = self._batch(batch_id)
        keys = batch.live_or_backup()
        if keys is None:
            raise KeysUnavailable(batch_id)
        return keys[crypto.Scheme.parse(scheme) if scheme else batch.default_scheme].public

    @property
    def batch_ids(self):
        return sorted(self._batches)

    def _batch(self, batch_id: int) -> _Batch:
        try:
            return self._batches[batch_id]
        except KeyError:
            raise UnknownBatch(batch_id) from None

    def can_issue(self, batch_id: int) -> bool:
        return batch_id in self._batches and self._batches[batch_id].keys is not None

    def backups_remaining(self, batch_id: int) -> int:
        return len(self._batch(batch_id).backups)

    def register_block_scheme(self, block: BlockId, scheme):
        self._block_scheme[block] = crypto.Scheme.parse(scheme)

    def register_symmetric(self, block: BlockId, key: crypto.SymmetricKey):
        self._symmetric[block] = key

    def register_preshared(self, block: BlockId, secret: variants.PresharedSecret):
        self._preshared[block] = secret

    def preshared_copy(self, block: BlockId) -> variants.PresharedSecret:
        return self._preshared[block]

    # -- signing ------------------------------------------------------------------

    def _check_quorum(self, shares_present: Iterable[str]):
        present = set(shares_present)
        unknown = present - set(self.holders)
        if unknown:
            raise UnknownShareHolder(", ".join(sorted(unknown)))
        if len(present) < self.m:
            raise QuorumRefused(len(present), self.m)

    def quorum_sign(self, batch_id: int, payload: bytes, shares_present: Iterable[str], scheme=None) -> bytes:
        """Sign iff at least m distinct share holders are present."""
        self._check_quorum(shares_present)
        return crypto.sign_license(self._signing_key(batch_id, scheme), payload)

    def _signing_key(self, batch_id: int, scheme=None) -> crypto.SigningKeypair:
        batch = self._batch(batch_id)
        if batch.keys is None:
            raise KeysUnavailable(batch_id)
        scheme = crypto.Scheme.parse(scheme) if scheme else batch.default_scheme
        try:
            return batch.keys[scheme]
        except KeyError:
            raise crypto.UnsupportedScheme(f"batch {batch_id} has no {scheme.value} key") from None

    def _grant(self, policy: IssuancePolicy, block: BlockId, clock: int) -> int:
        if not policy.top_up:
            return policy.grant_ops
        horizon = clock + policy.validity_period
        covered = max(self._coverage.get(block, clock), clock)
        if horizon <= covered:
            return 0
        self._coverage[block] = horizon
        return max(1, math.ceil(policy.grant_ops * (horizon - covered) / policy.validity_period))

    def issue_licenses(self, policy: IssuancePolicy, nonce_bundle, clock: int,
                       shares_present: Iterable[str], batch_id: int):
        """Answer every record of a nonce bundle with a license.

        Returns a :class:`~offswitch.transport.LicenseBundle`.
        """
        shares = list(shares_present)
        self._check_quorum(shares)
        self._batch(batch_id)
        expiry = clock + policy.validity_period
        records = []
        for rec in nonce_bundle.records:
            block = BlockId(nonce_bundle.chip_id, rec.index)
            kind = BlockKind(rec.kind)
            if kind is BlockKind.PRESHARED_BITS:
                secret = self._preshared.get(block)
                if secret is None:
                    continue
                payload_bits, self._preshared[block] = variants.preshared_issue(
                    secret, variants.BitChallengeNonce(tuple(rec.positions)))
                grant = policy.grant_ops
                records.append(LicenseRecord(rec.index, rec.nonce_value, grant, expiry,
                                             variants.pack_payload(payload_bits)))
                continue
            grant = self._grant(policy, block, clock)
            if grant <= 0:
                continue
            payload = license_payload(batch_id, block, rec.nonce_value, grant, expiry)
            if kind is BlockKind.SYMMETRIC_MAC:
                key = self._symmetric.get(block)
                if key is None:
                    continue
                proof = crypto.mac_tag(key, payload)
            else:
                proof = crypto.sign_license(self._signing_key(batch_id, self._block_scheme.get(block)), payload)
            records.append(LicenseRecord(rec.index, rec.nonce_value, grant, expiry, proof))
        return LicenseBundle(nonce_bundle.chip_id, batch_id, tuple(records))

    # -- compromise hooks ---------------------------------------------------------

    def destroy_keys(self, batch_ids: Iterable[int], backups_also: bool = False):
        for b in batch_ids:
            batch = self._batches.get(b)
            if batch is None:
                continue
            batch.keys = None
            if backups_also:
                batch.backups.clear()

    def restore_from_backup(self, batch_id: int) -> bool:
        batch = self._batch(batch_id)
        if batch.keys is not None:
            return True
        if not batch.backups:
            return False
        batch.keys = dict(batch.backups[0])
        return True

    def steal_key(self, batch_id: int, scheme=None) -> crypto.SigningKeypair:
        """Scenario hook: hand a batch private key to an attacker."""
        batch = self._batch(batch_id)
        keys = batch.live_or_backup()
        if keys is None:
            raise KeysUnavailable(batch_id)
        return keys[crypto.Scheme.parse(scheme) if scheme else batch.default_scheme]


def forge_with_key(keypair: crypto.SigningKeypair, batch_id: int, block: BlockId, nonce_value: int,
                   grant_ops: int, expiry: int) -> License:
    """License minted by whoever holds ``keypair`` (e.g. a thief)."""
    proof = crypto.sign_license(keypair, license_payload(batch_id, block, nonce_value, grant_ops, expiry))
    return License(block, nonce_value, grant_ops, expiry, proof, batch_id)
