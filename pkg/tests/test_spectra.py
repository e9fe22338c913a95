"""Spectrum evaluation against closed forms.

Oracles: AR(1) with coefficient a and unit innovation has
S(0) = 1/(1-a)^2, S(1/2) = 1/(1+a)^2, r[k] = a^k/(1-a^2), variance
1/(1-a^2), and entropy power equal to the innovation variance.  The
grid rectangle sum of a rational spectrum aliases at lag G, so these
hold to near machine precision at G = 4096.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdpcm.errors import (
    DegenerateSpectrumError,
    InvalidSpectrumError,
    ResolutionError,
)
from rdpcm.spectra import (
    ar_spectrum,
    autocorrelation,
    entropy_power,
    eval_psd,
    grid_frequencies,
    ma_spectrum,
    psd_extrema,
    psd_grid,
    tabulated_spectrum,
    variance,
    white_spectrum,
)

AR09 = ar_spectrum([0.9], 1.0)


def two_band_spectrum(grid_size=4096, low=4.0, high=1.0):
    """S = low for |f| < 1/4 and high elsewhere, as a tabulated grid."""
    f = grid_frequencies(grid_size)
    return tabulated_spectrum(np.where(np.abs(f) < 0.25, low, high))


def random_symmetric_spectrum(rng, grid_size=512):
    """A random even-symmetric tabulated spectrum bounded away from 0."""
    half = rng.uniform(0.05, 2.0, grid_size // 2 + 1)
    fold = np.minimum(np.arange(grid_size), grid_size - np.arange(grid_size))
    return tabulated_spectrum(half[fold])


class TestEvalPsd:
    def test_white_is_flat(self):
        spec = white_spectrum(1.0)
        assert eval_psd(spec, 0.3) == 1.0
        assert eval_psd(spec, -0.5) == 1.0

    def test_ar1_closed_form_endpoints(self):
        # 1/(1-0.9)^2 = 100 at DC, 1/(1+0.9)^2 = 0.27701 at the band edge
        assert eval_psd(AR09, 0.0) == pytest.approx(100.0, rel=1e-12)
        assert eval_psd(AR09, 0.5) == pytest.approx(1.0 / 3.61, rel=1e-6)

    def test_ar1_matches_direct_formula_on_grid(self):
        f = grid_frequencies(AR09.grid_size)
        direct = 1.0 / np.abs(1.0 - 0.9 * np.exp(-2j * np.pi * f)) ** 2
        np.testing.assert_allclose(psd_grid(AR09), direct, rtol=1e-12)

    def test_right_endpoint_wraps_periodically(self):
        spec = two_band_spectrum()
        assert eval_psd(spec, 0.5) == eval_psd(spec, -0.5)
        assert eval_psd(AR09, 0.5) == pytest.approx(
            eval_psd(AR09, -0.5), rel=1e-12
        )

    def test_out_of_range_frequency_rejected(self):
        with pytest.raises(ResolutionError):
            eval_psd(AR09, 0.51)
        with pytest.raises(ResolutionError):
            eval_psd(AR09, np.array([0.0, -0.7]))

    def test_ma_closed_form(self):
        spec = ma_spectrum([1.0, 0.5])
        f = 0.2
        expect = np.abs(1.0 + 0.5 * np.exp(-2j * np.pi * f)) ** 2
        assert eval_psd(spec, f) == pytest.approx(expect, rel=1e-12)


class TestConstruction:
    def test_unstable_ar_rejected(self):
        with pytest.raises(InvalidSpectrumError):
            ar_spectrum([1.0], 1.0)
        with pytest.raises(InvalidSpectrumError):
            ar_spectrum([0.5, 0.6], 1.0)

    def test_nonpositive_innovation_rejected(self):
        with pytest.raises(InvalidSpectrumError):
            ar_spectrum([0.5], 0.0)

    def test_tabulated_must_be_symmetric(self):
        values = np.ones(64)
        values[3] = 2.0  # breaks S(f) = S(-f)
        with pytest.raises(InvalidSpectrumError):
            tabulated_spectrum(values)

    def test_tabulated_must_be_nonnegative_and_1d(self):
        with pytest.raises(InvalidSpectrumError):
            tabulated_spectrum(-np.ones(64))
        with pytest.raises(InvalidSpectrumError):
            tabulated_spectrum(np.ones((8, 8)))

    def test_odd_grid_rejected(self):
        with pytest.raises(InvalidSpectrumError):
            tabulated_spectrum(np.ones(63))
        with pytest.raises(InvalidSpectrumError):
            ar_spectrum([0.5], 1.0, grid_size=17)

    def test_all_zero_ma_rejected(self):
        with pytest.raises(InvalidSpectrumError):
            ma_spectrum([0.0, 0.0])


class TestAutocorrelation:
    def test_white_is_delta(self):
        r = autocorrelation(white_spectrum(1.0), 5)
        assert r[0] == pytest.approx(1.0, rel=1e-12)
        np.testing.assert_allclose(r[1:], 0.0, atol=1e-12)

    def test_ar1_geometric_decay(self):
        r = autocorrelation(AR09, 10)
        expect = (0.9 ** np.arange(11)) / (1.0 - 0.81)
        np.testing.assert_allclose(r, expect, rtol=1e-6)

    def test_ma_taps_give_finite_support(self):
        r = autocorrelation(ma_spectrum([1.0, 0.5]), 3)
        np.testing.assert_allclose(r, [1.25, 0.5, 0.0, 0.0], atol=1e-12)

    def test_flat_tabulated(self):
        spec = tabulated_spectrum(np.full(128, 2.0))
        r = autocorrelation(spec, 2)
        np.testing.assert_allclose(r, [2.0, 0.0, 0.0], atol=1e-12)

    def test_lag_must_fit_grid(self):
        spec = tabulated_spectrum(np.ones(64))
        with pytest.raises(ResolutionError):
            autocorrelation(spec, 32)
        with pytest.raises(ResolutionError):
            autocorrelation(spec, -1)


class TestFunctionals:
    def test_entropy_power_white(self):
        assert entropy_power(white_spectrum(3.0)) == pytest.approx(3.0)

    def test_entropy_power_ar_is_innovation_variance(self):
        assert entropy_power(AR09) == pytest.approx(1.0, rel=1e-6)
        assert entropy_power(ar_spectrum([0.5, -0.3], 2.0)) == pytest.approx(
            2.0, rel=1e-6
        )

    def test_entropy_power_two_band(self):
        # exp(0.5 log 4 + 0.5 log 1) = 2
        assert entropy_power(two_band_spectrum()) == pytest.approx(
            2.0, rel=1e-9
        )

    def test_variance_and_extrema(self):
        assert variance(AR09) == pytest.approx(1.0 / 0.19, rel=1e-9)
        s_min, s_max = psd_extrema(AR09)
        assert s_min == pytest.approx(1.0 / 3.61, rel=1e-6)
        assert s_max == pytest.approx(100.0, rel=1e-9)
        assert psd_extrema(white_spectrum(1.0)) == (1.0, 1.0)
        spec = two_band_spectrum()
        assert variance(spec) == pytest.approx(2.5, rel=1e-9)
        assert psd_extrema(spec) == (1.0, 4.0)

    def test_identically_zero_spectrum_is_degenerate(self):
        with pytest.raises(DegenerateSpectrumError):
            entropy_power(tabulated_spectrum(np.zeros(64)))

    def test_small_zero_set_is_excluded_not_fatal(self):
        values = np.full(4096, 2.0)
        values[0] = 0.0  # a single spectral null at f = -1/2
        pe = entropy_power(tabulated_spectrum(values))
        assert pe == pytest.approx(2.0, rel=1e-3)

    def test_large_zero_set_gives_zero_entropy_power(self):
        f = grid_frequencies(4096)
        values = np.where(np.abs(f) < 0.2, 0.0, 1.0)
        assert entropy_power(tabulated_spectrum(values)) == 0.0

    def test_grid_convergence(self):
        # doubling the grid moves the AR(1) functionals by < 1e-6 relative
        coarse = ar_spectrum([0.9], 1.0, grid_size=4096)
        fine = ar_spectrum([0.9], 1.0, grid_size=8192)
        assert variance(fine) == pytest.approx(variance(coarse), rel=1e-6)
        assert entropy_power(fine) == pytest.approx(
            entropy_power(coarse), rel=1e-6
        )


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_functional_invariants_on_random_spectra(seed):
    spec = random_symmetric_spectrum(np.random.default_rng(seed))
    var = variance(spec)
    r = autocorrelation(spec, 8)
    assert r[0] == pytest.approx(var, rel=1e-9)
    pe = entropy_power(spec)
    assert 0.0 < pe <= var * (1.0 + 1e-12)
    s_min, s_max = psd_extrema(spec)
    assert s_min <= var <= s_max


def test_entropy_power_equals_variance_only_when_flat():
    flat = tabulated_spectrum(np.full(256, 1.7))
    assert entropy_power(flat) == pytest.approx(variance(flat), rel=1e-12)
    assert entropy_power(AR09) < variance(AR09)
