import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from offswitch import attacks as at
from offswitch import authorizer as au
from offswitch import fleet as fl
from offswitch import planted
from offswitch.chip import EditModel, audit_bypass

POLICY = au.IssuancePolicy(100, 3 * fl.DAY)


def make_fleet(mix=(("EcdsaTrng", 1.0),), schemes=("EcdsaP256",), seed=2, **kw):
    base = dict(chips=1, rows=3, cols=3, blocks_per_edge=2, mix=mix, schemes=schemes, preshared_bits=500,
                challenge_bits=16)
    base.update(kw)
    return fl.build_fleet(fl.FleetSpec(**base), POLICY, seed)


def captured_licenses(fleet, rounds=2):
    got = []
    for r in range(rounds):
        fl.license_round(fleet, r * fl.DAY, captured=got)
    at._challenge_all(fleet.chips, fleet.entropy, rounds * fl.DAY)
    return got


class TestReport:
    def test_successes_bounded(self):
        with pytest.raises(ValueError):
            at.AttackReport("x", attempts=1, successes=2)

    def test_json_and_csv(self):
        r = at.AttackReport("glitching", 10, 3, 4, True, 1.5, 7, "n")
        assert json.loads(r.to_json())["successes"] == 3
        csv_text = at.reports_to_csv([r, at.AttackReport("a", 1)])
        lines = csv_text.splitlines()
        assert lines[0].startswith("campaign,attempts")
        assert lines[1].startswith("a,") and lines[2].startswith("glitching,10,3,4,True,1.5,7")

    @given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 50)), min_size=3, max_size=3))
    def test_merge_associative_and_commutative(self, parts):
        reports = [at.AttackReport("c", a + s, s, s, s > 0, float(a), i) for i, (a, s) in enumerate(parts)]
        left = at.merge_reports([at.merge_reports(reports[:2]), reports[2]])
        right = at.merge_reports([reports[0], at.merge_reports(reports[1:])])
        flipped = at.merge_reports(reversed(reports))
        assert left == right == flipped

    def test_merge_rejects_mixed(self):
        with pytest.raises(ValueError):
            at.merge_reports([at.AttackReport("a"), at.AttackReport("b")])


@pytest.mark.parametrize("kind", ["EcdsaTrng", "CounterNonce", "SymmetricMac", "PresharedBits"])
def test_replay_never_succeeds(kind):
    f = make_fleet(mix=((kind, 1.0),), chips=2)
    caps = captured_licenses(f)
    assert at.replay_campaign(f.chips, caps, 2000, clock=2 * fl.DAY).successes == 0
    assert at.replay_campaign(f.chips, caps, 500, clock=2 * fl.DAY, cross_chip=True).successes == 0


def test_replay_harness_sees_planted_backdoor():
    f = make_fleet(chips=2)
    caps = captured_licenses(f)
    rep = at.replay_campaign(f.chips, caps, 500, clock=2 * fl.DAY, apply=planted.apply_license_ignoring_nonce)
    assert rep.successes > 0 and rep.chip_functional


def test_replay_needs_captures():
    with pytest.raises(ValueError):
        at.replay_campaign([], [], 1)


class TestGlitch:
    @pytest.mark.parametrize("b", [1, 2, 3])
    def test_rate_is_p_to_the_b(self, b):
        rep = at.glitch_campaign(at.GlitchModel(0.3), b, 20_000, seed=b)
        p = 0.3**b
        assert abs(rep.success_rate - p) <= 3 * math.sqrt(p * (1 - p) / 20_000)

    def test_thousand_targets(self):
        assert at.glitch_campaign(at.GlitchModel(0.5), 1000, 10_000, seed=1).successes == 0

    def test_detector_trips_counted(self):
        rep = at.glitch_campaign(at.GlitchModel(1.0, detector_p=0.5), 1, 2000, seed=3)
        assert 0 < rep.extra["detector_trips"] < 2000
        assert rep.successes + rep.extra["detector_trips"] == 2000

    def test_randomized_timing_lowers_rate(self):
        plain = at.glitch_campaign(at.GlitchModel(0.5), 2, 20_000, seed=4)
        jittered = at.glitch_campaign(at.GlitchModel(0.5, timing_randomized=True, coverage=0.5), 2, 20_000, seed=4)
        assert jittered.success_rate < plain.success_rate

    def test_certain_flip_is_planted_control(self):
        f = make_fleet()
        chip = f.chips[0]
        path = audit_bypass(chip.topology).weakest_path
        targets = [b for e in zip(path, path[1:]) for b in chip.topology.gate_map[e]]
        rep = at.glitch_campaign(at.GlitchModel(1.0), targets, 10, seed=1, chip=chip)
        assert rep.successes == 10 and rep.chip_functional

    def test_targets_off_path_leave_chip_locked(self):
        f = make_fleet()
        chip = f.chips[0]
        rep = at.glitch_campaign(at.GlitchModel(1.0), chip.topology.block_ids[:2], 10, seed=1, chip=chip)
        assert rep.successes == 10 and not rep.chip_functional

    def test_model_bounds(self):
        with pytest.raises(ValueError):
            at.GlitchModel(p_flip=-0.1)


class TestEdits:
    def test_ideal_attacker_on_cut_unlocks(self):
        f = make_fleet()
        rep = at.edit_campaign(f.chips[0], EditModel(1.0, 0.0), "weakest_path", seed=1)
        assert rep.chip_functional and rep.successes == 1

    def test_non_cut_leaves_chip_stalled(self):
        f = make_fleet()
        chip = f.chips[0]
        path = audit_bypass(chip.topology).weakest_path
        on_path = [b for e in zip(path, path[1:]) for b in chip.topology.gate_map[e]]
        rep = at.edit_campaign(chip, EditModel(1.0, 0.0), on_path[:-1], seed=1)
        assert not rep.chip_functional

    def test_collateral_damage_breaks_workload(self):
        f = make_fleet()
        rep = at.edit_campaign(f.chips[0], EditModel(1.0, 1.0), "weakest_path", seed=1)
        assert not rep.chip_functional and rep.extra["damaged_nodes"] > 0

    def test_random_strategy(self):
        f = make_fleet()
        rep = at.edit_campaign(f.chips[0], EditModel(1.0, 0.0), "random:3", seed=1)
        assert rep.extra["edits"] == 3

    def test_monte_carlo_matches_closed_form(self):
        n, ps, pd = 4, 0.9, 0.1
        rep = at.edit_campaign_trials(n, EditModel(ps, pd), 50_000, seed=2)
        p = (ps * (1 - pd)) ** n
        assert abs(rep.success_rate - p) <= 4 * math.sqrt(p * (1 - p) / 50_000)

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            at.edit_campaign(make_fleet().chips[0], EditModel(), "everything", 0)


class TestExtraction:
    def test_asymmetric_fleet_yields_nothing(self):
        f = make_fleet(mix=(("EcdsaTrng", 0.5), ("CounterNonce", 0.5)))
        rep = at.extraction_campaign(f.chips, 10_000, 10, seed=1)
        assert rep.blocks_defeated == 0 and not rep.chip_functional

    def test_unique_keys_one_block_per_scan(self):
        for scans in (1, 5, 20):
            g = make_fleet(mix=(("SymmetricMac", 1.0),))
            assert at.extraction_campaign(g.chips, scans, 1, seed=scans).blocks_defeated == scans

    def test_shared_key_one_scan_forges_all(self):
        f = make_fleet(mix=(("SymmetricMac", 1.0),), shared_symmetric_key=True)
        rep = at.extraction_campaign(f.chips, 1, 1, seed=1)
        assert rep.blocks_defeated == len(f.chips[0].states) and rep.chip_functional

    def test_preshared_scan_forges_its_block(self):
        f = make_fleet(mix=(("PresharedBits", 1.0),))
        rep = at.extraction_campaign(f.chips, 3, 1, seed=1)
        assert rep.blocks_defeated == 3


class TestForgery:
    def test_dual_scheme_chip_survives_one_break(self):
        for broken in ("EcdsaP256", "Ed25519"):
            g = make_fleet(schemes=("EcdsaP256", "Ed25519"))
            rep = at.forgery_campaign(g.chips[0], broken, seed=1)
            assert rep.blocks_defeated == len(g.chips[0].states) // 2
            assert not rep.chip_functional

    def test_single_scheme_chip_falls(self):
        f = make_fleet()
        rep = at.forgery_campaign(f.chips[0], "EcdsaP256", seed=1)
        assert rep.chip_functional and rep.successes == 1

    def test_nothing_broken(self):
        rep = at.forgery_campaign(make_fleet().chips[0], None, seed=1)
        assert rep.blocks_defeated == 0 and not rep.chip_functional

    def test_composition_law(self):
        """A chip mixing schemes is never easier than the easiest single-scheme chip."""
        def unlock_rate(schemes, broken):
            hits = 0
            for seed in range(4):
                g = make_fleet(schemes=schemes, seed=seed, rows=2, cols=2)
                hits += at.forgery_campaign(g.chips[0], broken, seed=seed).successes
            return hits / 4

        for broken in ("EcdsaP256", "Ed25519"):
            mixed = unlock_rate(("EcdsaP256", "Ed25519"), broken)
            single = min(unlock_rate(("EcdsaP256",), broken), unlock_rate(("Ed25519",), broken))
            assert mixed <= single

    def test_preshared_attacker_time(self):
        f = make_fleet(mix=(("PresharedBits", 1.0),), preshared_bits=10_000, challenge_bits=50)
        rep = at.forgery_campaign(f.chips[0], None, seed=1, preshared_revealed_fraction=0.5)
        assert 0.9 <= rep.wall_model_seconds / (365.25 * 86400) <= 1.1


def test_preshared_bruteforce_campaign_median():
    rep = at.preshared_forgery_campaign(24, 6, 0.0, 500, seed=3)
    assert 32 <= rep.extra["median_attempts"] <= 128


def test_key_theft_limited_to_batch():
    f = make_fleet(mix=(("EcdsaTrng", 0.5), ("CounterNonce", 0.5)), chips=4, batches=2)
    rep = at.key_theft_campaign(f, 0, seed=1)
    assert rep.extra == {"batch0_forgery_rate": 1.0, "batch1_forgery_rate": 0.0}


def test_campaigns_are_deterministic():
    def run():
        f = make_fleet(mix=(("SymmetricMac", 0.5), ("EcdsaTrng", 0.5)))
        return [at.extraction_campaign(f.chips, 3, 2, seed=9),
                at.edit_campaign(make_fleet().chips[0], EditModel(0.7, 0.2), "random:5", seed=9),
                at.glitch_campaign(at.GlitchModel(0.4), 3, 1000, seed=9)]

    assert run() == run()


def test_resetting_trng_reopens_replay_except_counters():
    hits = {}
    for kind in ("EcdsaTrng", "CounterNonce"):
        f = make_fleet(mix=((kind, 1.0),), chips=2)
        f.entropy = planted.ResettingEntropy(5)
        caps = []
        for day in range(2):
            f.entropy.reset()
            fl.license_round(f, day * fl.DAY, captured=caps)
        f.entropy.reset()
        at._challenge_all(f.chips, f.entropy, 2 * fl.DAY)
        hits[kind] = at.replay_campaign(f.chips, caps, 300, clock=2 * fl.DAY).successes
    assert hits["EcdsaTrng"] > 0 and hits["CounterNonce"] == 0
