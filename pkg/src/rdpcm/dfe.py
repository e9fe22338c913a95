"""Decision-feedback equalization as the channel-side mirror of
predictive quantization.

An ISI channel with colored noise reduces, after zero-forcing, to an
additive colored-noise channel.  Water-filling the transmit spectrum
against that noise, estimating with the matched filter, and predicting
the estimation error from its own past turns the channel into a
memoryless slicer channel whose SNR exponent equals the water-filling
capacity.  The simulation here is genie-aided: the predictor sees true
past estimation errors, so there is no error propagation and the
information identities can be checked in isolation.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter, welch

from .errors import ParameterError, SingularChannelError
from .filters import apply_fir, fir_response, realize_filter_pair
from .prediction import levinson
from .spectra import (
    autocorrelation,
    entropy_power,
    psd_grid,
    tabulated_spectrum,
)

LOG2 = float(np.log(2.0))

_SINGULAR_RESPONSE = 1e-9
_MAX_BISECT = 200

# Spectrum comparisons skip bands where the theory value is this far
# below the spectral peak (relative deviation is meaningless there).
_BAND_FLOOR = 1e-9


@dataclass(frozen=True)
class ChannelModel:
    """Linear Gaussian channel: FIR intersymbol interference, additive
    stationary noise, and an input power budget."""

    isi_taps: tuple
    noise_spec: object
    power: float

    def validate(self):
        if len(self.isi_taps) == 0:
            raise ParameterError("isi_taps must be nonempty")
        if self.power <= 0:
            raise ParameterError(f"power must be > 0, got {self.power}")


@dataclass(frozen=True)
class DfeSolution:
    equivalent_noise: np.ndarray
    theta: float
    shaping_mag2: np.ndarray
    sigma_u2: float
    capacity_nats: float
    sigma_e2: float
    mi_scalar_bits: float
    x_power: float
    valid_start: int
    valid_stop: int
    traces: dict | None = None

    @property
    def capacity_bits(self):
        return self.capacity_nats / LOG2


def equivalent_noise(channel):
    """Noise spectrum after zero-forcing the ISI: S_N = S_Z/|C|^2 on
    the grid of the noise spectrum."""
    channel.validate()
    g = channel.noise_spec.grid_size
    c_mag2 = np.abs(fir_response(channel.isi_taps, g)) ** 2
    if np.min(c_mag2) < _SINGULAR_RESPONSE**2:
        raise SingularChannelError(
            "channel frequency response vanishes on the grid; "
            "zero-forcing equalizer does not exist"
        )
    return psd_grid(channel.noise_spec) / c_mag2


def channel_waterfill(s_n, power):
    """Water-fill a transmit budget over a noise spectrum.

    Returns (theta, shaping_mag2, capacity_nats) where theta solves
    mean([theta - S_N]+) = power by bisection, the transmit variance is
    set to theta, shaping_mag2 = [theta - S_N]+/theta, and the capacity
    is mean(0.5*log(1 + S_X/S_N)) in nats.
    """
    s_n = np.asarray(s_n, dtype=float)
    if power <= 0:
        raise ParameterError(f"power must be > 0, got {power}")
    lo, hi = 0.0, float(np.max(s_n)) + 2.0 * power
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        filled = float(np.mean(np.maximum(mid - s_n, 0.0)))
        if filled < power:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    theta = 0.5 * (lo + hi)
    s_x = np.maximum(theta - s_n, 0.0)
    shaping = s_x / theta
    capacity = float(
        np.mean(0.5 * np.log1p(s_x / np.maximum(s_n, 1e-300)))
    )
    return theta, shaping, capacity


def channel_shaping_mag2(s_n, theta):
    """Transmit shaping for a given water level: [theta - S_N]+/theta."""
    if theta <= 0:
        raise ParameterError(f"theta must be > 0, got {theta}")
    return np.maximum(theta - np.asarray(s_n, dtype=float), 0.0) / theta


def slicer_snr_theory(s_x, s_n):
    """Signal-to-noise ratio after ideal error prediction:
    exp(mean(log(1 + S_X/S_N))).  Equals sigma_U^2/Pe of the estimation
    error, and 2^(2*capacity_bits)."""
    s_x = np.asarray(s_x, dtype=float)
    s_n = np.asarray(s_n, dtype=float)
    return float(np.exp(np.mean(np.log1p(s_x / np.maximum(s_n, 1e-300)))))


def dfe_simulate(channel, n_samples, seed, predictor_order, fir_taps=257):
    """Run the genie-aided prediction receiver over the equivalent
    ISI-free channel.

    The transmit sequence is i.i.d. Gaussian with variance theta shaped
    by the water-filling filter; the receive filter is its conjugate
    (identical taps for the zero-phase realization).  The estimation
    error D = U - Uhat is predicted from its own true past with
    coefficients derived from the theoretical error spectrum
    min(S_N, theta), and the residual variance is compared against the
    capacity through 0.5*log2(sigma_U^2/sigma_E^2).
    """
    from .testchannel import synthesize_source

    if predictor_order < 1:
        raise ParameterError(
            f"predictor_order must be >= 1, got {predictor_order}"
        )
    channel.validate()
    s_n = equivalent_noise(channel)
    theta, shaping, capacity = channel_waterfill(s_n, channel.power)
    pair = realize_filter_pair(shaping, fir_taps)

    u_seed, noise_seed = np.random.SeedSequence(seed).spawn(2)
    u = np.random.default_rng(u_seed).normal(
        0.0, np.sqrt(theta), n_samples
    )
    x = apply_fir(pair.pre_taps, pair.delay, u)
    noise = synthesize_source(
        tabulated_spectrum(s_n), n_samples, noise_seed
    )
    y = x + noise
    uhat = apply_fir(pair.post_taps, pair.delay, y)
    d = u - uhat

    s_d = tabulated_spectrum(np.minimum(s_n, theta))
    coeffs = levinson(autocorrelation(s_d, predictor_order)).coeffs
    dhat = lfilter(
        np.concatenate(([0.0], np.asarray(coeffs, dtype=float))), [1.0], d
    )
    e = d - dhat
    v = uhat + dhat

    start = max(4 * max(predictor_order, fir_taps), fir_taps)
    stop = n_samples - fir_taps
    if stop - start < 1000:
        raise ParameterError(
            f"n_samples = {n_samples} too short for taps {fir_taps}"
        )
    sl = slice(start, stop)
    sigma_e2 = float(np.var(e[sl]))
    return DfeSolution(
        equivalent_noise=s_n,
        theta=theta,
        shaping_mag2=shaping,
        sigma_u2=theta,
        capacity_nats=capacity,
        sigma_e2=sigma_e2,
        mi_scalar_bits=float(0.5 * np.log2(theta / sigma_e2)),
        x_power=float(np.var(x[sl])),
        valid_start=start,
        valid_stop=stop,
        traces={
            "U": u, "X": x, "Y": y, "Uhat": uhat,
            "D": d, "Dhat": dhat, "E": e, "V": v,
        },
    )


def error_entropy_power(solution):
    """Entropy power of the theoretical estimation-error spectrum
    min(S_N, theta): the benchmark for the measured sigma_E^2."""
    return entropy_power(
        tabulated_spectrum(np.minimum(solution.equivalent_noise,
                                      solution.theta))
    )


def backward_spectrum_check(solution, n_bands=32, nperseg=4096):
    """Band-averaged comparison of the measured estimation-error
    spectrum against min(S_N, theta).

    Welch periodogram of the D trace, folded onto the two-sided grid
    and averaged over n_bands equal frequency bands; returns the
    largest relative deviation from the equally band-averaged theory
    curve.  Requires a simulation run with traces.
    """
    if solution.traces is None:
        raise ParameterError("simulation was run without traces")
    d = solution.traces["D"][solution.valid_start : solution.valid_stop]
    freqs, pxx = welch(
        d, fs=1.0, nperseg=nperseg, return_onesided=False,
        detrend=False, scaling="density",
    )
    theory = np.minimum(solution.equivalent_noise, solution.theta)
    g = theory.size
    grid_f = np.arange(g) / g - 0.5
    # map both onto band index by frequency in [-1/2, 1/2)
    f_wrapped = np.where(freqs >= 0.5, freqs - 1.0, freqs)
    band_w = np.clip(
        ((f_wrapped + 0.5) * n_bands).astype(int), 0, n_bands - 1
    )
    band_g = np.clip(
        ((grid_f + 0.5) * n_bands).astype(int), 0, n_bands - 1
    )
    peak = float(np.max(theory))
    worst = 0.0
    for b in range(n_bands):
        t = theory[band_g == b]
        p = pxx[band_w == b]
        if t.size == 0 or p.size == 0:
            continue
        t_avg = float(np.mean(t))
        if t_avg < _BAND_FLOOR * peak:
            continue
        worst = max(worst, abs(float(np.mean(p)) / t_avg - 1.0))
    return worst
