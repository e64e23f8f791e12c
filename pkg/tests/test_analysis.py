import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from fiberqkd import analysis
from fiberqkd._validation import BracketError, InvalidArgumentError, UnsupportedConfigError
from fiberqkd.adversary import AttackStrategy
from fiberqkd.analysis import (
    crossover,
    find_crossover,
    key_fraction,
    leading_scheme,
    mu_r,
    multiphoton_leakage,
    scheme_metrics,
    sweep,
)
from fiberqkd.protocols import ChannelModel, Scheme, SchemeConfig, empirical_metrics, run_session
from oracles import binary_entropy_mp, binomial_sigma

SCHEMES = list(Scheme)


class TestSchemeMetrics:
    def test_blt(self):
        mt = scheme_metrics(SchemeConfig("blt", 2))
        assert (mt.eta_p, mt.eta_e, mt.p_d) == pytest.approx((3 / 4, 1 / 3, 1 / 3))
        assert not mt.extrapolated

    def test_iwy(self):
        mt = scheme_metrics(SchemeConfig("iwy", 2))
        assert (mt.eta_p, mt.eta_e, mt.p_d) == pytest.approx((2 / 3, 1 / 2, 1 / 4))

    def test_bb84_and_blt_plus(self):
        assert scheme_metrics("bb84").eta_e == 0.585
        mt = scheme_metrics("blt_plus")
        assert (mt.eta_p, mt.eta_e, mt.p_d) == pytest.approx((5 / 8, 1 / 5, 2 / 5))

    def test_blt_m3(self):
        mt = scheme_metrics(SchemeConfig("blt", 3))
        assert mt.eta_p == 7 / 8 and mt.extrapolated

    def test_ratio_set(self):
        ratios = [scheme_metrics(s).ratio for s in SCHEMES]
        assert ratios == pytest.approx([2.34, 2, 1, 0.5])

    def test_blt_plus_other_m_unsupported(self):
        with pytest.raises(UnsupportedConfigError):
            scheme_metrics(SchemeConfig("blt_plus", 3))


class TestMuR:
    def test_endpoints(self):
        assert mu_r(0) == 1 and mu_r(1) == 1
        assert mu_r(0.5) == pytest.approx(0, abs=1e-15)

    def test_p011(self):
        oracle = 1 - float(binary_entropy_mp("0.11"))
        assert mu_r(0.11) == pytest.approx(oracle, abs=1e-14)
        assert mu_r(0.11) == pytest.approx(0.5001, abs=0.0005)

    @given(st.floats(0, 1))
    def test_symmetry(self, p):
        assert mu_r(p) == pytest.approx(mu_r(1 - p), abs=1e-12)

    @given(st.floats(1e-9, 1 - 1e-9))
    def test_matches_high_precision(self, p):
        assert mu_r(p) == pytest.approx(1 - float(binary_entropy_mp(p)), abs=1e-12)

    @pytest.mark.parametrize("bad", [-0.01, 1.01, float("nan")])
    def test_out_of_range(self, bad):
        with pytest.raises(InvalidArgumentError):
            mu_r(bad)


class TestKeyFraction:
    def test_zero_error(self):
        assert key_fraction("blt", 0) == 0.75
        assert key_fraction("bb84", 0) == 0.25

    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_zero_error_equals_eta_p(self, scheme):
        assert key_fraction(scheme, 0) == scheme_metrics(scheme).eta_p

    def test_blt_005(self):
        oracle = 0.75 * (1 - float(binary_entropy_mp(0.05)) - 0.05)
        assert key_fraction("blt", 0.05) == pytest.approx(oracle, abs=1e-12)
        assert key_fraction("blt", 0.05) == pytest.approx(0.4977, abs=0.001)

    def test_clamped(self):
        assert key_fraction("bb84", 0.3) == 0
        assert key_fraction("bb84", 0.3, clamp=False) < 0

    def test_two_pulse_train_retains_nothing(self):
        assert key_fraction(SchemeConfig("blt", 1), 0.01) == 0


class TestCrossover:
    def _oracle(self, a, b, lo, hi):
        return brentq(lambda p: key_fraction(a, p) - key_fraction(b, p), lo, hi, xtol=1e-12)

    def test_blt_vs_blt_plus(self):
        root = crossover("blt", "blt_plus", (0.05, 0.25))
        assert root == pytest.approx(self._oracle("blt", "blt_plus", 0.05, 0.25), abs=1e-6)
        assert root == pytest.approx(0.128, abs=0.003)

    def test_iwy_vs_blt_plus(self):
        root = crossover("iwy", "blt_plus", (0.005, 0.1))
        assert root == pytest.approx(self._oracle("iwy", "blt_plus", 0.005, 0.1), abs=1e-6)
        assert root == pytest.approx(0.032, abs=0.005)

    def test_blt_dominates_bb84(self):
        with pytest.raises(BracketError):
            crossover("blt", "bb84", (0.01, 0.4))
        # sign scan: BLT never falls below BB84
        grid = np.linspace(0, 0.5, 5001)
        assert all(key_fraction("blt", p) >= key_fraction("bb84", p) for p in grid)
        assert find_crossover("blt", "bb84") is None

    def test_find_scan(self):
        assert find_crossover("blt", "blt_plus") == pytest.approx(0.128, abs=0.003)
        assert find_crossover("iwy", "blt_plus") == pytest.approx(0.032, abs=0.005)

    def test_bad_bracket(self):
        with pytest.raises(InvalidArgumentError):
            crossover("blt", "blt_plus", (0.2, 0.1))


class TestMultiphoton:
    def test_values(self):
        assert multiphoton_leakage("bb84", 0.1) == pytest.approx(0.025)
        assert multiphoton_leakage("blt", 0.12) == pytest.approx(0.02)
        assert multiphoton_leakage("iwy", 0.2) == pytest.approx(0.05)
        assert all(multiphoton_leakage(s, 0) == 0 for s in ("bb84", "iwy", "blt"))

    def test_blt_plus_not_available(self):
        assert multiphoton_leakage("blt_plus", 0.1) is None

    def test_warns_for_large_nbar(self):
        with pytest.warns(UserWarning):
            multiphoton_leakage("blt", 0.5)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            multiphoton_leakage("blt", 0.2)


class TestSweep:
    def test_zero_row(self):
        [row] = sweep(grid=[0.0])
        assert [row.key_fractions[s] for s in SCHEMES] == pytest.approx([0.25, 2 / 3, 0.75, 0.625])
        assert row.mu_r == 1 and not row.clamped

    def test_crossing_between_grid_points(self):
        rows = sweep(grid=analysis.po_grid(0, 0.25, 0.005))
        first = next(r.p_o for r in rows if r.key_fractions[Scheme.BLT] < r.key_fractions[Scheme.BLT_PLUS])
        assert first == pytest.approx(0.13)
        prev = first - 0.005
        assert prev < crossover("blt", "blt_plus", (0.05, 0.25)) < first

    def test_all_zero_at_half(self):
        [row] = sweep(grid=[0.5])
        assert all(v == 0 for v in row.key_fractions.values())
        assert row.clamped == frozenset(SCHEMES)

    def test_monotone_and_bounded(self):
        rows = sweep(grid=analysis.po_grid(0, 0.5, 0.001))
        for s in SCHEMES:
            curve = analysis.curve_array(rows, s)
            assert np.all(np.diff(curve) <= 1e-15)
            assert np.all(curve <= scheme_metrics(s).eta_p)

    def test_ordering_small_and_large_po(self):
        for row in sweep(grid=np.linspace(1e-4, 0.12, 200)):
            assert leading_scheme(row) is Scheme.BLT
        zero = brentq(lambda p: key_fraction("blt_plus", p, clamp=False), 0.2, 0.4)
        for row in sweep(grid=np.linspace(0.14, zero - 1e-6, 200)):
            assert leading_scheme(row) is Scheme.BLT_PLUS

    def test_grid_validation(self):
        with pytest.raises(InvalidArgumentError):
            sweep(grid=[0.1, 0.05])
        with pytest.raises(InvalidArgumentError):
            analysis.po_grid(0, 0.6, 0.1)

    def test_po_grid_count(self):
        assert len(analysis.po_grid(0, 0.25, 0.005)) == 51
        assert analysis.po_grid(0, 0.25, 0.005)[-1] == 0.25


@pytest.mark.parametrize("scheme", ["iwy", "blt", "blt_plus"])
def test_monte_carlo_consistency(scheme):
    config = SchemeConfig(scheme, 2)
    ref = scheme_metrics(config)
    n = 100_000
    plain = empirical_metrics(run_session(config, n, seed=50))
    assert abs(plain.eta_p_hat - ref.eta_p) <= 4 * binomial_sigma(ref.eta_p, n)
    f = 1.0
    att = empirical_metrics(
        run_session(config, n, ChannelModel(0, f), AttackStrategy.for_scheme(config), seed=51)
    )
    k = att.sifted_bits
    assert abs(att.eve_fraction_hat / f - ref.eta_e) <= 4 * binomial_sigma(ref.eta_e, k)
    assert abs(att.p_o_hat / f - ref.p_d) <= 4 * binomial_sigma(ref.p_d, k)
