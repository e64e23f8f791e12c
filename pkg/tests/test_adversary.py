import math

import numpy as np
import pytest

from fiberqkd import adversary, optics
from fiberqkd._validation import InvalidArgumentError
from fiberqkd.adversary import (
    AttackStrategy,
    PassThrough,
    breidbart_intercept,
    estimate_attack_params,
    switch_intercept_resend,
)
from fiberqkd.optics import build_train, interferometer_distribution
from fiberqkd.protocols import ChannelModel, SchemeConfig, empirical_metrics, run_session

BLT = SchemeConfig("blt", 2)
IWY = SchemeConfig("iwy", 2)
BLT_PLUS = SchemeConfig("blt_plus")
BB84 = SchemeConfig("bb84")


def breidbart_exact():
    """Enumerate Eve's and Bob's outcomes for matched bases; returns (guess, error)."""
    guess = err = 0.0
    for qa in range(4):
        phi_a = qa * math.pi / 2
        phi_b = (qa % 2) * math.pi / 2
        bit = qa // 2
        for k, beta in enumerate((math.pi / 4, 5 * math.pi / 4)):
            p_eve = math.cos((phi_a - beta) / 2) ** 2
            guess += p_eve * (k == bit) / 4
            p_bob_d1 = math.sin((beta - phi_b) / 2) ** 2
            p_bob_wrong = p_bob_d1 if bit == 0 else 1 - p_bob_d1
            err += p_eve * p_bob_wrong / 4
    return guess, err


class TestSwitchSchedule:
    def test_even_fixed_pairs(self):
        left, unpaired = adversary.switch_schedule_left_bins(8, 3, np.random.default_rng(0))
        assert (left == [0, 2, 4, 6]).all() and (unpaired == -1).all()

    def test_odd_pairs_cover_all_but_one(self):
        left, unpaired = adversary.switch_schedule_left_bins(7, 500, np.random.default_rng(0))
        assert set(unpaired) == {0, 2, 4, 6}
        for row, u in zip(left, unpaired):
            covered = sorted(list(row) + list(row + 1) + [u])
            assert covered == list(range(7))


class TestSwitchIntercept:
    def test_blt_learns_outer_boundaries_equally(self):
        rng = np.random.default_rng(1)
        amps = optics.train_amplitudes(np.zeros((100_000, 4), int))
        hit = AttackStrategy.for_scheme(BLT).intercept(BLT, amps, rng)
        counts = np.bincount(hit.boundary, minlength=3)
        assert counts[1] == 0
        assert counts[0] / 100_000 == pytest.approx(0.5, abs=0.01)
        assert counts[2] / 100_000 == pytest.approx(0.5, abs=0.01)
        assert hit.learned.all() and not hit.blocked.any()

    def test_record_matches_resent_pattern(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            pattern = tuple(int(v) for v in 2 * rng.integers(0, 2, 4))
            pattern = (0,) + pattern[1:]
            rec, resent = switch_intercept_resend(BLT, build_train(4, pattern), rng)
            b = rec.boundary
            true_diff = (pattern[b + 1] - pattern[b]) % 4
            assert rec.known_phase_difference == true_diff
            assert rec.resent_pattern.adjacent_differences()[b] == true_diff
            # Bob at the measured boundary reproduces Alice's bit
            dist = interferometer_distribution(resent)
            wrong = 1 if true_diff == 0 else 0
            assert dist.probability(b + 1, wrong) <= 1e-15

    def test_iwy_pass_through_probability(self):
        rng = np.random.default_rng(3)
        amps = optics.train_amplitudes(np.zeros((60_000, 3), int))
        hit = AttackStrategy.for_scheme(IWY, PassThrough.RESEND).intercept(IWY, amps, rng)
        assert np.mean(~hit.learned) == pytest.approx(1 / 3, abs=0.01)
        assert not hit.blocked.any()
        # fully random resend on pass-through
        diffs = np.diff(hit.resent_quarter_turns[~hit.learned].astype(int), axis=1) % 4
        assert np.mean(diffs == 2) == pytest.approx(0.5, abs=0.02)

    def test_pass_through_block_drops_train(self):
        rng = np.random.default_rng(4)
        blocked = 0
        for _ in range(300):
            rec, resent = switch_intercept_resend(IWY, build_train(3, (0, 2, 0)), rng)
            if resent is None:
                blocked += 1
                assert rec.boundary is None and rec.resent_pattern is None
            else:
                assert rec.boundary in (0, 1)
        assert 60 < blocked < 140

    def test_one_difference_at_most(self):
        config = SchemeConfig("blt", 3)
        rec = run_session(config, 20_000, ChannelModel(0, 1), AttackStrategy.for_scheme(config), seed=4)
        idx = rec.alice_key.train_index[rec.eve_known_mask]
        assert idx.size > 0
        assert np.bincount(idx).max() == 1

    def test_incompatible_scheme(self):
        with pytest.raises(InvalidArgumentError):
            switch_intercept_resend(BB84, build_train(2, (0, 1)))


class TestErrorLocalisation:
    @pytest.mark.parametrize("config", [BLT, SchemeConfig("blt", 3), SchemeConfig("iwy", 4)], ids=str)
    def test_error_only_off_boundary(self, config):
        rec = run_session(config, 100_000, ChannelModel(0, 1), AttackStrategy.for_scheme(config), seed=6)
        errors = rec.errors()
        on = rec.eve_known_mask
        assert errors[on].sum() == 0
        assert np.mean(errors[~on]) == pytest.approx(0.5, abs=0.01)

    def test_interception_keeps_acceptance_for_even_trains(self):
        for config in (BLT, BLT_PLUS, SchemeConfig("iwy", 3)):
            quiet = empirical_metrics(run_session(config, 50_000, seed=7))
            loud = empirical_metrics(
                run_session(config, 50_000, ChannelModel(0, 1), AttackStrategy.for_scheme(config), seed=7)
            )
            assert loud.eta_p_hat == pytest.approx(quiet.eta_p_hat, abs=0.01)


class TestBreidbart:
    def test_exact_enumeration(self):
        guess, err = breidbart_exact()
        assert guess == pytest.approx(math.cos(math.pi / 8) ** 2, abs=1e-12)
        assert err == pytest.approx(1 - (math.cos(math.pi / 8) ** 4 + math.sin(math.pi / 8) ** 4), abs=1e-12)
        assert err == pytest.approx(0.25, abs=1e-12)

    def test_single_shot_states(self):
        rng = np.random.default_rng(8)
        outcomes = [breidbart_intercept(0, rng) for _ in range(20_000)]
        guesses = np.array([g for g, _ in outcomes])
        assert np.mean(guesses == 0) == pytest.approx(math.cos(math.pi / 8) ** 2, abs=0.01)
        for g, phase in outcomes[:50]:
            assert phase == pytest.approx(math.pi / 4 + math.pi * g)

    @pytest.mark.parametrize("bad", [0.5, 4, -1, True])
    def test_rejects_non_protocol_states(self, bad):
        with pytest.raises(InvalidArgumentError):
            breidbart_intercept(bad)

    def test_monte_carlo_rates(self):
        est = estimate_attack_params(BB84, 100_000, seed=9)
        assert est.guess_success_hat == pytest.approx(math.cos(math.pi / 8) ** 2, abs=0.01)
        assert est.p_d_hat == pytest.approx(0.25, abs=0.01)
        assert est.eta_e_hat == 0


class TestEstimate:
    @pytest.mark.parametrize(
        "config,eta_e,p_d", [(BLT, 1 / 3, 1 / 3), (IWY, 1 / 2, 1 / 4), (BLT_PLUS, 1 / 5, 2 / 5)], ids=str
    )
    def test_published_values(self, config, eta_e, p_d):
        est = estimate_attack_params(config, 100_000, seed=10)
        assert est.eta_e_hat == pytest.approx(eta_e, abs=0.01)
        assert est.p_d_hat == pytest.approx(p_d, abs=0.01)

    def test_iwy_resend_mode_conditioning(self):
        est = estimate_attack_params(IWY, 100_000, seed=11, pass_through=PassThrough.RESEND)
        assert est.eta_e_hat == pytest.approx(1 / 3, abs=0.01)
        assert est.p_d_hat == pytest.approx(1 / 3, abs=0.01)
        assert est.eta_e_conditioned == pytest.approx(1 / 2, abs=0.01)
        assert est.p_d_conditioned == pytest.approx(1 / 4, abs=0.01)

    def test_minimum_trains(self):
        with pytest.raises(InvalidArgumentError):
            estimate_attack_params(BLT, 5000)
