import itertools

import pytest

from offswitch import block_model as bm
from offswitch import modelcheck as mc
from offswitch import planted
from offswitch.types import BlockKind


def total_traces(alphabet_size, max_length):
    return sum(alphabet_size**n for n in range(max_length + 1))


@pytest.mark.parametrize("kind", list(BlockKind), ids=lambda k: k.label)
def test_exhaustive_depth_12_is_clean(kind):
    result = mc.check_traces(kind, max_length=12)
    assert result.ok, result.counterexamples
    assert result.traces_checked == total_traces(len(mc.ALPHABET), 12)


def naive_problems(kind, length):
    """Every trace of exactly ``length`` ops, without any merging."""
    issuer = mc.make_issuer(kind)
    found = []
    for ops in itertools.product(mc.ALPHABET, repeat=length):
        cfg = mc._Config(bm.power_on(issuer.config))
        for op in ops:
            cfg, problems = mc.step(cfg, op, issuer)
            found.extend((cfg.trace, p) for p in problems)
    return found


def test_merged_search_agrees_with_naive_enumeration():
    assert naive_problems(BlockKind.ECDSA_TRNG, 4) == []
    assert mc.check_traces(BlockKind.ECDSA_TRNG, max_length=4).ok


@pytest.mark.parametrize("bug", [planted.apply_license_ignoring_nonce, planted.apply_license_keeping_nonce,
                                 planted.apply_license_unchecked], ids=lambda f: f.__name__)
def test_planted_bugs_are_caught(monkeypatch, bug):
    monkeypatch.setattr(bm, "apply_license", bug)
    result = mc.check_traces(BlockKind.ECDSA_TRNG, max_length=6)
    assert not result.ok
    trace, problem = result.counterexamples[0]
    assert trace and problem


def test_naive_enumeration_also_catches_planted_bug(monkeypatch):
    monkeypatch.setattr(bm, "apply_license", planted.apply_license_ignoring_nonce)
    assert naive_problems(BlockKind.ECDSA_TRNG, 4)


def test_counterexamples_are_capped(monkeypatch):
    monkeypatch.setattr(bm, "apply_license", planted.apply_license_unchecked)
    result = mc.check_traces(BlockKind.SYMMETRIC_MAC, max_length=5, max_counterexamples=3)
    assert len(result.counterexamples) == 3
