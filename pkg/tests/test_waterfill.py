"""Water-filling solver against piecewise closed forms.

Oracles: a flat spectrum has theta = D and rate (1/2)log2(sigma^2/D);
the two-band spectrum (S = 4 on |f| < 1/4, 1 elsewhere) floods the low
band at D = 1.5 with theta = 2 and rate 0.5 * (1/2)log2(4/2) = 0.25
bits; below the spectral minimum the rate equals the entropy-power
bound (1/2)log2(Pe/D).  A continuous-band oracle via scipy.integrate
cross-checks the grid quadrature; grid values differ from the analytic
ones only through band-edge rasterization, well under 2e-3 here.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from rdpcm.errors import DomainError
from rdpcm.spectra import (
    ar_spectrum,
    entropy_power,
    eval_psd,
    psd_grid,
    variance,
    white_spectrum,
)
from rdpcm.waterfill import (
    half_whitened_spectrum,
    nats_to_bits,
    prediction_gains,
    rdf,
    slb,
    water_level_for_distortion,
)
from test_spectra import two_band_spectrum

AR09 = ar_spectrum([0.9], 1.0)
LOG2 = np.log(2.0)


class TestWaterLevel:
    def test_flat_spectrum_level_equals_distortion(self):
        assert water_level_for_distortion(
            white_spectrum(1.0), 0.25
        ) == pytest.approx(0.25, abs=1e-9)

    def test_below_spectral_minimum_level_equals_distortion(self):
        # S_min = 0.27701 for AR(1) a=0.9, so D = 0.1 never clips
        assert water_level_for_distortion(AR09, 0.1) == pytest.approx(
            0.1, abs=1e-8
        )

    def test_two_band_piecewise_form(self):
        # 0.5*theta + 0.5*1 = 1.5  =>  theta = 2
        theta = water_level_for_distortion(two_band_spectrum(), 1.5)
        assert theta == pytest.approx(2.0, rel=2e-3)

    def test_full_distortion_returns_spectral_max(self):
        spec = two_band_spectrum()
        assert water_level_for_distortion(spec, variance(spec)) == 4.0

    def test_monotone_in_distortion(self):
        levels = [
            water_level_for_distortion(AR09, d)
            for d in (0.05, 0.1, 0.5, 1.0, 3.0, 5.0)
        ]
        assert all(a <= b + 1e-12 for a, b in zip(levels, levels[1:]))

    def test_out_of_range_distortion(self):
        with pytest.raises(DomainError) as info:
            water_level_for_distortion(white_spectrum(1.0), 1.5)
        assert info.value.valid_interval == (0.0, 1.0)
        with pytest.raises(DomainError):
            water_level_for_distortion(white_spectrum(1.0), 0.0)


class TestRdf:
    def test_white_quarter_distortion_is_one_bit(self):
        sol = rdf(white_spectrum(1.0), 0.25)
        assert sol.rate_bits == pytest.approx(1.0, abs=1e-9)
        assert sol.slb_tight

    def test_ar1_slb_tight_value(self):
        sol = rdf(AR09, 0.1)
        assert sol.rate_bits == pytest.approx(
            0.5 * np.log2(10.0), abs=1e-6
        )
        assert sol.slb_tight

    def test_two_band_rate(self):
        sol = rdf(two_band_spectrum(), 1.5)
        assert sol.rate_bits == pytest.approx(0.25, abs=2e-3)
        assert not sol.slb_tight

    def test_solution_record_invariants(self):
        spec = two_band_spectrum()
        sol = rdf(spec, 1.5)
        S = psd_grid(spec)
        np.testing.assert_allclose(
            sol.distortion_spectrum, np.minimum(sol.theta, S), atol=0
        )
        assert sol.distortion_total == pytest.approx(1.5, rel=1e-9)
        assert sol.rate_nats >= slb(spec, 1.5) - 1e-12

    def test_continuous_oracle_two_band(self):
        # same solve on the analytic band description via scipy.quad
        spec = two_band_spectrum()
        sol = rdf(spec, 1.5)

        def s_of_f(f):
            return 4.0 if abs(f) < 0.25 else 1.0

        dist = quad(lambda f: min(sol.theta, s_of_f(f)), -0.5, 0.5,
                    points=[-0.25, 0.25])[0]
        rate = quad(
            lambda f: max(0.5 * np.log(s_of_f(f) / sol.theta), 0.0),
            -0.5, 0.5, points=[-0.25, 0.25],
        )[0]
        assert dist == pytest.approx(1.5, rel=2e-3)
        assert nats_to_bits(rate) == pytest.approx(sol.rate_bits, abs=2e-3)

    def test_curve_monotone_and_convex(self):
        spec = AR09
        grid = np.geomspace(0.01, variance(spec), 50)
        rates = [rdf(spec, d).rate_nats for d in grid]
        slopes = np.diff(rates) / np.diff(grid)
        assert all(s <= 1e-12 for s in slopes), "rate must not increase"
        assert all(
            b >= a - 1e-9 for a, b in zip(slopes, slopes[1:])
        ), "rate must be convex in D"


class TestSlb:
    def test_white_at_full_variance_is_zero(self):
        assert slb(white_spectrum(1.0), 1.0) == 0.0

    def test_tight_region_matches_rdf(self):
        for d in (0.05, 0.1, 0.2, 0.277):
            assert rdf(AR09, d).rate_nats == pytest.approx(
                slb(AR09, d), abs=1e-7
            )

    def test_strict_gap_above_spectral_minimum(self):
        d = 1.0
        assert rdf(AR09, d).rate_nats > slb(AR09, d) + 1e-3

    def test_rejects_nonpositive_distortion(self):
        with pytest.raises(DomainError):
            slb(AR09, 0.0)


@settings(max_examples=30, deadline=None)
@given(
    sigma2=st.floats(0.01, 100.0),
    frac=st.floats(1e-4, 1.0),
)
def test_white_rdf_closed_form(sigma2, frac):
    d = sigma2 * frac
    sol = rdf(white_spectrum(sigma2), d)
    expect = max(0.5 * np.log(sigma2 / d), 0.0)
    # the solver stops at a distortion residual of 1e-10*variance, which
    # maps to a rate slack of residual/(2*theta) = 5e-7 nats at the
    # smallest D/variance ratio generated here
    assert sol.rate_nats == pytest.approx(expect, abs=2e-6)
    assert sol.theta == pytest.approx(min(d, sigma2), rel=1e-5)


class TestPredictionGains:
    def test_white_has_no_gain(self):
        assert prediction_gains(white_spectrum(1.0)) == pytest.approx(
            (1.0, 1.0, 1.0)
        )

    def test_ar1_closed_loop_gain(self):
        g_closed, g_open, ratio = prediction_gains(AR09)
        # variance / entropy power = (1/0.19) / 1
        assert g_closed == pytest.approx(1.0 / 0.19, rel=1e-6)
        assert ratio == pytest.approx(g_closed / g_open, rel=1e-12)
        assert ratio > 1.0

    def test_ratio_equals_half_whitened_route(self):
        # independent route: ratio = (var/Pe)^2 of the sqrt spectrum
        for spec in (AR09, two_band_spectrum(), ar_spectrum([0.5, -0.2], 2.0)):
            _, _, ratio = prediction_gains(spec)
            hw = half_whitened_spectrum(spec)
            other = (variance(hw) / entropy_power(hw)) ** 2
            assert ratio == pytest.approx(other, rel=1e-9)

    def test_half_whitened_spectrum_values(self):
        hw = half_whitened_spectrum(AR09)
        np.testing.assert_allclose(
            psd_grid(hw), np.sqrt(psd_grid(AR09)), rtol=1e-12
        )
        assert eval_psd(hw, 0.0) == pytest.approx(10.0, rel=1e-9)
