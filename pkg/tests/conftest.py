from dataclasses import dataclass

import numpy as np
import pytest

from offswitch import block_model as bm
from offswitch import crypto, variants
from offswitch.entropy import EntropySource
from offswitch.types import BlockId, BlockKind, License, license_payload

ALL_KINDS = list(BlockKind)


@dataclass
class Rig:
    """One block plus whatever the authorizer would hold for it."""

    state: bm.SecurityBlockState
    signer: object
    entropy: EntropySource

    @property
    def config(self):
        return self.state.config

    def challenge(self, clock=0):
        self.state, nonce = bm.issue_challenge(self.state, self.entropy, clock)
        return nonce

    def license_for(self, nonce, grant=10, expiry=1_000, batch_id=None):
        cfg = self.config
        batch_id = cfg.batch_id if batch_id is None else batch_id
        if cfg.kind is BlockKind.PRESHARED_BITS:
            bits, self.signer = variants.preshared_issue(self.signer, variants.BitChallengeNonce(nonce.positions))
            return License(cfg.id, nonce.value, cfg.preshared_grant, expiry, variants.pack_payload(bits), batch_id)
        payload = license_payload(batch_id, cfg.id, nonce.value, grant, expiry)
        if cfg.kind is BlockKind.SYMMETRIC_MAC:
            proof = crypto.mac_tag(self.signer, payload)
        else:
            proof = crypto.sign_license(self.signer, payload)
        return License(cfg.id, nonce.value, grant, expiry, proof, batch_id)

    def license(self, clock=0, **kw):
        return self.license_for(self.challenge(clock), **kw)

    def accept(self, clock=0, **kw):
        lic = self.license(clock, **kw)
        self.state = bm.apply_license(self.state, lic, clock)
        return lic


def make_rig(kind, seed=1, block=BlockId(1, 0), scheme=crypto.Scheme.ECDSA_P256, preshared_grant=10, **cfg_kw):
    kind = BlockKind(kind)
    if kind in (BlockKind.ECDSA_TRNG, BlockKind.COUNTER_NONCE):
        signer = crypto.generate_keypair(scheme, seed)
        verifier = signer.public
    elif kind is BlockKind.SYMMETRIC_MAC:
        signer = verifier = crypto.symmetric_key_from_seed(block.index, seed)
    else:
        signer = verifier = variants.PresharedSecret.random(256, np.random.Generator(np.random.PCG64(seed)))
        cfg_kw.setdefault("challenge_bits", 16)
        cfg_kw["preshared_grant"] = preshared_grant
    config = bm.BlockConfig(block, kind, verifier, **cfg_kw)
    return Rig(bm.power_on(config), signer, EntropySource(seed + 1000, label="test-trng"))


@pytest.fixture(params=ALL_KINDS, ids=lambda k: k.label)
def rig(request):
    return make_rig(request.param)


# -- acceptance reporting ------------------------------------------------------------

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.get_closest_marker("acceptance") and (report.when == "call" or report.failed):
        verdict = "PASS" if report.passed else "FAIL"
        item.config.stash[_ACCEPTANCE_KEY].append((item.name, verdict, report.duration))


def pytest_terminal_summary(terminalreporter, config):
    rows = config.stash.get(_ACCEPTANCE_KEY, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict, secs in sorted(rows):
        terminalreporter.write_line(f"{verdict}  {name}  ({secs:.2f}s)")
    passed = sum(v == "PASS" for _, v, _ in rows)
    terminalreporter.write_line(f"{passed}/{len(rows)} criteria passed")
