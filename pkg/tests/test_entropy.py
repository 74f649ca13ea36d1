import math

import numpy as np
import pytest

from offswitch import entropy as ent


def test_same_seed_same_stream():
    a = ent.EntropySource(3).draw_bits(256)
    b = ent.EntropySource(3).draw_bits(256)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, ent.EntropySource(4).draw_bits(256))


def test_bad_arguments():
    with pytest.raises(ValueError):
        ent.EntropySource(1, bias=1.5)
    with pytest.raises(ValueError):
        ent.EntropySource(1).draw_bits(0)
    with pytest.raises(ValueError):
        ent.xor_combine([], 8)


@pytest.mark.parametrize("bias", [0.1, 0.5, 0.8])
def test_bias_is_respected(bias):
    bits = ent.EntropySource(11, bias).draw_bits(200_000)
    sigma = math.sqrt(bias * (1 - bias) / bits.size)
    assert abs(bits.mean() - bias) < 4 * sigma


def test_xor_of_biased_sources_follows_piling_up():
    biases = [0.1, 0.2, 0.3]
    src = ent.XorSource([ent.EntropySource(i, b) for i, b in enumerate(biases)])
    bits = src.draw_bits(300_000)
    expected = ent.piling_up_bias(biases)
    sigma = math.sqrt(expected * (1 - expected) / bits.size)
    assert abs(bits.mean() - expected) < 4 * sigma


def test_one_fair_source_makes_xor_fair():
    assert ent.piling_up_bias([0.5, 0.9, 0.01]) == 0.5
    assert ent.piling_up_bias([0.0, 0.0]) == 0.0
    assert ent.piling_up_bias([1.0, 1.0]) == 0.0


def test_stuck_source_does_not_hurt_xor():
    stuck = ent.EntropySource(1, bias=1.0)
    fair = ent.EntropySource(2)
    combined = ent.xor_combine([stuck, fair], 100_000)
    assert abs(combined.mean() - 0.5) < 0.01


def test_bits_to_int_is_msb_first():
    assert ent.bits_to_int([1, 0, 1]) == 5
    assert ent.draw_int(ent.EntropySource(0, bias=1.0), 128) == (1 << 128) - 1


def test_draw_below_is_uniform():
    src = ent.EntropySource(5)
    draws = [ent.draw_below(src, 6) for _ in range(6000)]
    counts = np.bincount(draws, minlength=6)
    expected = len(draws) / 6
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < 25.74  # 5 degrees of freedom, p = 1e-4
    assert ent.draw_below(src, 1) == 0


def test_fork_is_deterministic_and_distinct():
    a, b = ent.EntropySource(9), ent.EntropySource(9)
    fa, fb = a.fork(), b.fork()
    assert np.array_equal(fa.draw_bits(64), fb.draw_bits(64))
    assert fa.seed != 9


class TestCollisions:
    def test_license_count_product(self):
        assert ent.prior_license_count(1e3, 1e6, 2, 5) == pytest.approx(3.65e12)

    def test_128_bit_linear_estimate(self):
        est = ent.collision_probability(36e12, 128)
        assert est.linear == pytest.approx(36e12 / 2**128)
        assert est.linear == pytest.approx(1.06e-25, rel=0.01)

    def test_birthday_small_space(self):
        # 300 draws from 2^16 values: 1 - exp(-n^2 / 2^17)
        est = ent.collision_probability(300, 16)
        assert est.birthday == pytest.approx(1 - math.exp(-300**2 / 2**17))

    @pytest.mark.parametrize("draws,bits", [(300, 16), (20, 8)])
    def test_degenerate_space_matches_simulation(self, draws, bits):
        exact = 1.0
        for i in range(draws):
            exact *= 1 - i / 2**bits
        exact = 1 - exact
        trials = 20_000
        sim = ent.simulate_collisions(draws, bits, trials, seed=17)
        sigma = math.sqrt(exact * (1 - exact) / trials)
        assert abs(sim - exact) < 4 * sigma
        assert ent.collision_probability(draws, bits).birthday == pytest.approx(exact, rel=0.1)

    def test_bits_range(self):
        with pytest.raises(ValueError):
            ent.collision_probability(10, 0)
