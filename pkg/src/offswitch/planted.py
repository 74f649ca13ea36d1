"""Deliberately vulnerable block variants.

These stand in for a supply-chain backdoor. They exist so tests can show that
each attack campaign and the model checker do report successes when a flaw is
present; a harness that finds nothing on these is broken.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import block_model as bm
from .entropy import EntropySource
from .types import License

# bound now so the wrappers still reach the real check when tests patch the module
_genuine_apply = bm.apply_license


def apply_license_ignoring_nonce(state: bm.SecurityBlockState, license: License, clock: int) -> bm.SecurityBlockState:
    """Accepts any correctly signed license for this block, fresh or not."""
    if license.block != state.id:
        raise bm.NonceMismatch(str(state.id))
    if not bm.verify_proof(state, license):
        raise bm.BadProof(str(state.id))
    if clock > license.expiry:
        raise bm.Expired(str(state.id))
    return bm.credit(state, license.grant_ops)


def apply_license_keeping_nonce(state: bm.SecurityBlockState, license: License, clock: int) -> bm.SecurityBlockState:
    """Checks everything but forgets to clear the pending nonce after use."""
    pending = state.pending_nonce
    new = _genuine_apply(state, license, clock)
    return replace(new, pending_nonce=pending)


def apply_license_unchecked(state: bm.SecurityBlockState, license: License, clock: int) -> bm.SecurityBlockState:
    """Credits whatever it is handed."""
    return bm.credit(state, license.grant_ops)


class ResettingEntropy(EntropySource):
    """TRNG stand-in that restarts its stream whenever :meth:`reset` is called.

    Models a generator re-seeded to a fixed state on every power cycle, so
    challenges repeat and old licenses become valid again. Counter nonces are
    unaffected since they never draw entropy.
    """

    def reset(self):
        self._rng = np.random.Generator(np.random.PCG64(self.seed))
