"""Shaping-filter design and FIR realization checks.

The ideal response is algebraic (1 - min(theta,S)/S), so design values
are pinned pointwise; realization quality is pinned by re-evaluating
the FIR response on the grid.  The AR(1) a=0.9, theta=0.1, T=257 case
achieves a max pointwise |H|^2 error of 2.7e-5, frozen here with
headroom as < 1e-3.
"""

import numpy as np
import pytest
from scipy.signal import welch

from rdpcm.errors import ParameterError
from rdpcm.filters import (
    apply_fir,
    design_prefilter_mag2,
    fir_response,
    realize_filter_pair,
)
from rdpcm.spectra import ar_spectrum, psd_grid, white_spectrum

AR09 = ar_spectrum([0.9], 1.0)


class TestDesign:
    def test_white_is_flat(self):
        target = design_prefilter_mag2(white_spectrum(1.0), 0.25)
        np.testing.assert_allclose(target, 0.75, atol=1e-12)

    def test_flooded_spectrum_gives_full_stopband(self):
        target = design_prefilter_mag2(AR09, 200.0)
        np.testing.assert_allclose(target, 0.0, atol=1e-12)

    def test_ar1_pointwise(self):
        target = design_prefilter_mag2(AR09, 0.1)
        S = psd_grid(AR09)
        # at DC: 1 - 0.1/100
        dc = np.argmax(S)
        assert target[dc] == pytest.approx(0.999, rel=1e-9)
        np.testing.assert_allclose(target, 1.0 - np.minimum(0.1, S) / S,
                                   atol=1e-12)
        assert np.all(target >= 0.0) and np.all(target <= 1.0)

    def test_spectral_zero_passes_zero(self):
        # a hard spectral null keeps a zero response (nothing to pass)
        values = np.ones(64)
        values[16] = 0.0
        values[48] = 0.0  # mirror point keeps the grid symmetric
        from rdpcm.spectra import tabulated_spectrum

        target = design_prefilter_mag2(tabulated_spectrum(values), 0.5)
        assert target[16] == 0.0 and target[48] == 0.0

    def test_rejects_nonpositive_level(self):
        with pytest.raises(ParameterError):
            design_prefilter_mag2(AR09, 0.0)


class TestRealize:
    def test_flat_target_is_single_scaled_tap(self):
        pair = realize_filter_pair(np.full(256, 0.75), 65)
        center = pair.delay
        assert pair.pre_taps[center] == pytest.approx(np.sqrt(0.75),
                                                      abs=1e-12)
        off = np.delete(pair.pre_taps, center)
        np.testing.assert_allclose(off, 0.0, atol=1e-12)

    def test_unit_target_is_identity_impulse(self):
        pair = realize_filter_pair(np.ones(256), 33)
        assert pair.delay == 16
        assert pair.pre_taps[16] == pytest.approx(1.0, abs=1e-12)
        assert pair.spectral_error < 1e-12

    def test_post_taps_are_reversed_pre_taps(self):
        target = design_prefilter_mag2(AR09, 0.5)
        pair = realize_filter_pair(target, 129)
        np.testing.assert_array_equal(pair.post_taps, pair.pre_taps[::-1])
        # zero-phase design: the taps are symmetric, so reversal is a no-op
        np.testing.assert_allclose(pair.post_taps, pair.pre_taps, atol=1e-15)

    def test_ar1_realization_accuracy(self):
        target = design_prefilter_mag2(AR09, 0.1)
        pair = realize_filter_pair(target, 257)
        resp2 = np.abs(fir_response(pair.pre_taps, AR09.grid_size)) ** 2
        assert np.max(np.abs(resp2 - target)) < 1e-3

    def test_error_non_increasing_in_tap_count(self):
        target = design_prefilter_mag2(AR09, 0.1)
        errs = [
            realize_filter_pair(target, T).spectral_error
            for T in (33, 65, 129, 257)
        ]
        assert all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))

    def test_parseval(self):
        target = design_prefilter_mag2(AR09, 0.5)
        pair = realize_filter_pair(target, 129)
        resp2 = np.abs(fir_response(pair.pre_taps, AR09.grid_size)) ** 2
        assert np.sum(pair.pre_taps**2) == pytest.approx(
            np.mean(resp2), abs=1e-9
        )

    def test_tap_count_validation(self):
        with pytest.raises(ParameterError):
            realize_filter_pair(np.ones(256), 64)
        with pytest.raises(ParameterError):
            realize_filter_pair(np.ones(64), 65)


class TestApplyFir:
    def test_unit_taps_are_identity(self):
        x = np.arange(20.0)
        np.testing.assert_allclose(apply_fir(np.array([1.0]), 0, x), x)

    def test_shift_is_compensated(self):
        x = np.sin(np.arange(50.0))
        out = apply_fir(np.array([0.0, 1.0, 0.0]), 1, x)
        np.testing.assert_allclose(out, x, atol=1e-12)

    def test_matches_plain_convolution(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(200)
        taps = rng.standard_normal(9)
        out = apply_fir(taps, 4, x)
        np.testing.assert_allclose(out, np.convolve(x, taps)[4:204],
                                   atol=1e-12)

    def test_signal_must_be_longer_than_taps(self):
        with pytest.raises(ParameterError):
            apply_fir(np.ones(8), 3, np.ones(8))

    def test_cascade_shapes_white_noise_to_mag4(self):
        # running pre then post over white noise lands the output PSD on
        # |H1|^4, checked band-averaged at the 15% level
        target = design_prefilter_mag2(AR09, 0.5)
        pair = realize_filter_pair(target, 129)
        rng = np.random.default_rng(11)
        x = rng.standard_normal(200_000)
        y = apply_fir(pair.post_taps, pair.delay,
                      apply_fir(pair.pre_taps, pair.delay, x))
        freqs, pxx = welch(y[200:-200], nperseg=4096,
                           return_onesided=False, detrend=False,
                           scaling="density")
        f_wrapped = np.where(freqs >= 0.5, freqs - 1.0, freqs)
        theory = target**2
        grid_f = np.arange(target.size) / target.size - 0.5
        n_bands = 16
        for b in range(n_bands):
            lo, hi = -0.5 + b / n_bands, -0.5 + (b + 1) / n_bands
            t = np.mean(theory[(grid_f >= lo) & (grid_f < hi)])
            if t < 0.05:
                continue  # stop-band: relative comparison meaningless
            p = np.mean(pxx[(f_wrapped >= lo) & (f_wrapped < hi)])
            assert p == pytest.approx(t, rel=0.15), f"band [{lo}, {hi})"
