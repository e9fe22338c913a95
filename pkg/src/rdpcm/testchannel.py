"""Predictive quantization loop and its open-loop forward equivalent.

The closed loop pre-filters the source, predicts the filtered signal
from past loop outputs, adds Gaussian noise at the water level to the
prediction error, and post-filters the loop output.  The forward form
adds the same noise directly to the pre-filtered signal with no loop;
algebraically both produce the same channel output sample by sample,
which the test suite uses to pin down the recursion.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError, ParameterError
from .filters import apply_fir, design_prefilter_mag2, realize_filter_pair
from .prediction import PredictorCoeffs, noisy_predictor
from .spectra import PowerSpectrum, eval_psd, psd_grid, tabulated_spectrum, variance
from .stats import sample_autocorr
from .waterfill import rdf

ZQ_AUTOCORR_LAGS = 20

# Residual start-up correlation target for AR synthesis warm-up.
_AR_SETTLE = 1e-12


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one predictive-loop run.

    burn_in defaults to 4*max(L, T) when left as None.  keep_traces
    retains the full signal paths on the result for spectral checks.
    """

    source: PowerSpectrum
    D: float
    seed: int
    L: int = 64
    T: int = 257
    N: int = 1_000_000
    burn_in: int | None = None
    keep_traces: bool = False

    def resolved_burn_in(self):
        if self.burn_in is not None:
            return self.burn_in
        return 4 * max(self.L, self.T)

    def validate(self):
        if self.L < 0:
            raise ParameterError(f"predictor order must be >= 0, got {self.L}")
        var = variance(self.source)
        if not (0.0 < self.D <= var):
            raise DomainError(
                f"target distortion {self.D} outside (0, {var}]",
                valid_interval=(0.0, var),
            )
        if self.N <= 10 * self.resolved_burn_in():
            raise ParameterError(
                f"N = {self.N} too short for burn_in = "
                f"{self.resolved_burn_in()} (need N > 10*burn_in)"
            )


@dataclass(frozen=True)
class SimResult:
    measured_d: float
    var_z: float
    var_zq: float
    mi_scalar_bits: float
    zq_autocorr: np.ndarray
    theta: float
    rate_theory_bits: float
    valid_start: int
    valid_stop: int
    traces: dict | None = None


def _ar_warmup(a):
    """Samples needed for the driven AR recursion to forget a zero
    start, from the slowest pole."""
    if not a:
        return 0
    poles = np.roots(np.concatenate(([1.0], -np.asarray(a, dtype=float))))
    rho = float(np.max(np.abs(poles)))
    if rho <= 0.0:
        return len(a)
    n = int(np.ceil(np.log(_AR_SETTLE) / np.log(rho)))
    return min(max(n, 64), 200_000)


def synthesize_source(spec, n_samples, seed):
    """Draw n_samples of a zero-mean stationary Gaussian process with
    the given spectrum.

    AR spectra run the driven recursion and discard a warm-up segment;
    MA spectra convolve white noise with the taps; tabulated spectra
    use circular amplitude shaping in the frequency domain with one
    grid length discarded at each edge.  Identical seeds give identical
    output.
    """
    rng = np.random.default_rng(seed)
    if spec.kind == "ar":
        warm = _ar_warmup(spec.a)
        w = rng.normal(0.0, np.sqrt(spec.sigma_w2), n_samples + warm)
        if spec.a:
            den = np.concatenate(([1.0], -np.asarray(spec.a, dtype=float)))
            x = lfilter([1.0], den, w)
        else:
            x = w
        return x[warm:]
    if spec.kind == "ma":
        taps = np.asarray(spec.taps, dtype=float)
        w = rng.standard_normal(n_samples + taps.size - 1)
        return np.convolve(w, taps, mode="valid")
    # Tabulated: shape white noise so the circular process has the
    # target density at every DFT frequency, then keep the middle.
    g = spec.grid_size
    m = n_samples + 2 * g
    w = rng.standard_normal(m)
    freqs = np.arange(m // 2 + 1) / m
    gain = np.sqrt(eval_psd(spec, freqs))
    x = np.fft.irfft(np.fft.rfft(w) * gain, n=m)
    return x[g : g + n_samples]


def _loop_predictor(source, theta, order):
    """Coefficients the loop runs with: the best linear predictor of
    the ideally pre-filtered signal seen through noise of variance
    theta."""
    if order == 0:
        return PredictorCoeffs(order=0, coeffs=(), mse=float("nan"))
    filtered = np.maximum(psd_grid(source) - theta, 0.0)
    return noisy_predictor(tabulated_spectrum(filtered), theta, order)


def _run_loop(u, noise, coeffs):
    """The per-sample recursion; prehistory of the loop output is zero.

    Returns (z, zq, v)."""
    n = u.size
    order = len(coeffs)
    crev = np.ascontiguousarray(coeffs[::-1], dtype=float)
    vpad = np.zeros(n + order)
    z = np.empty(n)
    zq = np.empty(n)
    for i in range(n):
        uhat = np.dot(vpad[i : i + order], crev)
        z[i] = u[i] - uhat
        zq[i] = z[i] + noise[i]
        vpad[order + i] = uhat + zq[i]
    return z, zq, vpad[order:]


def _prepare(config):
    config.validate()
    wf = rdf(config.source, config.D)
    pair = realize_filter_pair(
        design_prefilter_mag2(config.source, wf.theta), config.T
    )
    source_seed, noise_seed = np.random.SeedSequence(config.seed).spawn(2)
    x = synthesize_source(config.source, config.N, source_seed)
    u = apply_fir(pair.pre_taps, pair.delay, x)
    noise = np.random.default_rng(noise_seed).normal(
        0.0, np.sqrt(wf.theta), config.N
    )
    coeffs = _loop_predictor(config.source, wf.theta, config.L)
    return wf, pair, x, u, noise, coeffs


def _assemble(config, wf, pair, x, u, z, zq, v):
    y = apply_fir(pair.post_taps, pair.delay, v)
    start = max(config.resolved_burn_in(), config.T)
    stop = config.N - config.T
    sl = slice(start, stop)
    err = y[sl] - x[sl]
    var_z = float(np.var(z[sl]))
    result = SimResult(
        measured_d=float(np.mean(err * err)),
        var_z=var_z,
        var_zq=float(np.var(zq[sl])),
        mi_scalar_bits=float(0.5 * np.log2(1.0 + var_z / wf.theta)),
        zq_autocorr=sample_autocorr(zq[sl], ZQ_AUTOCORR_LAGS),
        theta=wf.theta,
        rate_theory_bits=wf.rate_bits,
        valid_start=start,
        valid_stop=stop,
        traces=(
            {"X": x, "U": u, "Z": z, "Zq": zq, "V": v, "Y": y}
            if config.keep_traces
            else None
        ),
    )
    return result


def run_predictive_channel(config):
    """Run the closed prediction loop and report distortion, prediction
    error statistics, and the scalar-channel information rate
    0.5*log2(1 + var_z/theta) in bits."""
    wf, pair, x, u, noise, coeffs = _prepare(config)
    z, zq, v = _run_loop(u, noise, np.asarray(coeffs.coeffs, dtype=float))
    return _assemble(config, wf, pair, x, u, z, zq, v)


def run_forward_equivalent(config, noise=None):
    """Open-loop form of the same channel: V = U + noise directly.

    With noise drawn from the config seed (the default) the V, Zq and Y
    paths coincide with run_predictive_channel up to rounding; a shared
    explicit noise sequence gives the same guarantee.
    """
    wf, pair, x, u, own_noise, coeffs = _prepare(config)
    if noise is None:
        noise = own_noise
    else:
        noise = np.asarray(noise, dtype=float)
        if noise.size != config.N:
            raise ParameterError(
                f"noise length {noise.size} does not match N = {config.N}"
            )
    v = u + noise
    if config.L:
        num = np.concatenate(([0.0], np.asarray(coeffs.coeffs, dtype=float)))
        uhat = lfilter(num, [1.0], v)
    else:
        uhat = np.zeros_like(v)
    z = u - uhat
    zq = v - uhat
    return _assemble(config, wf, pair, x, u, z, zq, v)


def finite_order_mi(spec, d_target, order):
    """Information rate of the scalar loop channel when the predictor
    is truncated to the given order, in bits.

    Order 0 means no prediction at all.  The value decreases toward the
    rate-distortion function as the order grows, and for white sources
    it does not depend on the order.
    """
    if order < 0:
        raise ParameterError(f"order must be >= 0, got {order}")
    wf = rdf(spec, d_target)
    filtered = np.maximum(psd_grid(spec) - wf.theta, 0.0)
    if order == 0:
        sigma2 = float(np.mean(filtered))
    else:
        sigma2 = noisy_predictor(
            tabulated_spectrum(filtered), wf.theta, order
        ).mse
    return float(0.5 * np.log2(1.0 + sigma2 / wf.theta))
