"""Power spectra of stationary processes on a uniform frequency grid.

A spectrum lives on the G-point grid f_i = i/G - 1/2 covering one period
[-1/2, 1/2) of normalized frequency.  Every integral in the package is a
plain rectangle sum over this grid, which for periodic integrands is
spectrally accurate and keeps all tolerances deterministic.

Three parametric kinds are supported:

* ``ar``        - S(f) = sigma_w^2 / |1 - sum_i a_i e^{-j2pi f i}|^2
* ``ma``        - S(f) = |sum_k b_k e^{-j2pi f k}|^2
* ``tabulated`` - explicit nonnegative values at the grid points
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    InvalidSpectrumError,
    ResolutionError,
)

DEFAULT_GRID_SIZE = 4096

# Grid values at or below this level are treated as spectral zeros when
# taking the log integral (see entropy_power).
ZERO_LEVEL = 1e-300

# A spectrum whose zero set exceeds this fraction of the grid has
# entropy power 0 by convention.
ZERO_FRACTION_LIMIT = 0.01


@dataclass(frozen=True)
class PowerSpectrum:
    """A nonnegative, even-symmetric power spectral density.

    Do not construct directly; use ar_spectrum / ma_spectrum /
    tabulated_spectrum / white_spectrum, which validate their inputs.
    """

    kind: str
    grid_size: int = DEFAULT_GRID_SIZE
    a: tuple = ()
    sigma_w2: float = 1.0
    taps: tuple = ()
    values: np.ndarray = field(default=None, repr=False, compare=False)


def grid_frequencies(grid_size):
    """Frequencies f_i = i/G - 1/2 of the G-point grid."""
    return np.arange(grid_size) / grid_size - 0.5


def _check_grid_size(grid_size):
    if grid_size < 2 or grid_size % 2 != 0:
        raise InvalidSpectrumError(
            f"grid_size must be a positive even integer, got {grid_size}"
        )


def ar_spectrum(a, sigma_w2, grid_size=DEFAULT_GRID_SIZE):
    """Autoregressive spectrum with coefficients a_1..a_p and innovation
    variance sigma_w2.

    The recursion X_n = sum_i a_i X_{n-i} + W_n must be stable: all roots
    of 1 - sum_i a_i z^{-i} strictly inside the unit circle.
    """
    _check_grid_size(grid_size)
    a = tuple(float(c) for c in a)
    if sigma_w2 <= 0:
        raise InvalidSpectrumError(f"sigma_w2 must be positive, got {sigma_w2}")
    if a:
        roots = np.roots(np.concatenate(([1.0], -np.asarray(a))))
        if roots.size and np.max(np.abs(roots)) >= 1.0:
            raise InvalidSpectrumError(
                "unstable AR polynomial: root magnitude "
                f"{np.max(np.abs(roots)):.6g} >= 1"
            )
    return PowerSpectrum(kind="ar", grid_size=grid_size, a=a,
                         sigma_w2=float(sigma_w2))


def ma_spectrum(taps, grid_size=DEFAULT_GRID_SIZE):
    """Moving-average spectrum S(f) = |sum_k b_k e^{-j2pi f k}|^2."""
    _check_grid_size(grid_size)
    taps = tuple(float(b) for b in taps)
    if not taps or not any(taps):
        raise InvalidSpectrumError("MA taps must contain a nonzero entry")
    return PowerSpectrum(kind="ma", grid_size=grid_size, taps=taps)


def white_spectrum(sigma2, grid_size=DEFAULT_GRID_SIZE):
    """Flat spectrum at level sigma2 (an AR model with no coefficients)."""
    return ar_spectrum((), sigma2, grid_size)


def tabulated_spectrum(values):
    """Spectrum given by explicit grid values.

    The length fixes the grid size and must be even.  Values must be
    nonnegative and even-symmetric: S(f_i) = S(f_{(G-i) mod G}).
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1:
        raise InvalidSpectrumError("tabulated values must be a 1-D array")
    _check_grid_size(values.size)
    if np.any(~np.isfinite(values)) or np.any(values < 0):
        raise InvalidSpectrumError("tabulated values must be finite and >= 0")
    mirrored = values[(-np.arange(values.size)) % values.size]
    scale = np.max(values) if np.max(values) > 0 else 1.0
    if np.max(np.abs(values - mirrored)) > 1e-9 * scale:
        raise InvalidSpectrumError(
            "tabulated values are not even-symmetric on the grid"
        )
    values = values.copy()
    values.flags.writeable = False
    return PowerSpectrum(kind="tabulated", grid_size=values.size,
                         values=values)


def eval_psd(spec, f):
    """Evaluate S at frequency f (scalar or array), f in [-1/2, 1/2].

    The right endpoint is accepted and wraps to -1/2 by periodicity.
    Tabulated spectra use nearest-grid-point lookup.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < -0.5) or np.any(f > 0.5):
        raise ResolutionError(
            "frequency outside [-1/2, 1/2]: "
            f"{f[np.argmax((f < -0.5) | (f > 0.5))] if f.ndim else float(f)}"
        )
    if spec.kind == "ar":
        resp = np.ones_like(f, dtype=complex)
        for i, c in enumerate(spec.a, start=1):
            resp -= c * np.exp(-2j * np.pi * f * i)
        out = spec.sigma_w2 / np.abs(resp) ** 2
    elif spec.kind == "ma":
        resp = np.zeros_like(f, dtype=complex)
        for k, b in enumerate(spec.taps):
            resp += b * np.exp(-2j * np.pi * f * k)
        out = np.abs(resp) ** 2
    elif spec.kind == "tabulated":
        G = spec.grid_size
        idx = np.rint((f + 0.5) * G).astype(int) % G
        out = spec.values[idx]
    else:
        raise InvalidSpectrumError(f"unknown spectrum kind {spec.kind!r}")
    return out if out.ndim else float(out)


def psd_grid(spec):
    """All grid values S(f_i) as an array of length grid_size."""
    if spec.kind == "tabulated":
        return np.asarray(spec.values, dtype=float)
    return eval_psd(spec, grid_frequencies(spec.grid_size))


def autocorrelation(spec, max_lag):
    """Autocorrelation r[0..max_lag], r[k] = integral of S(f) cos(2pi f k).

    Computed as a rectangle sum over the grid, so lags must stay well
    below the grid resolution: max_lag < grid_size / 2.
    """
    if max_lag < 0:
        raise ResolutionError(f"max_lag must be >= 0, got {max_lag}")
    if max_lag >= spec.grid_size // 2:
        raise ResolutionError(
            f"max_lag {max_lag} needs grid_size > {2 * max_lag}, "
            f"got {spec.grid_size}"
        )
    S = psd_grid(spec)
    f = grid_frequencies(spec.grid_size)
    lags = np.arange(max_lag + 1)
    # r[k] = mean over grid of S * cos(2 pi f k); outer product is fine
    # at the default grid size.
    return (np.cos(2 * np.pi * np.outer(lags, f)) @ S) / spec.grid_size


def variance(spec):
    """Process variance, the integral of S over one frequency period."""
    return float(np.mean(psd_grid(spec)))


def psd_extrema(spec):
    """(min, max) of S over the grid."""
    S = psd_grid(spec)
    return float(np.min(S)), float(np.max(S))


def entropy_power(spec):
    """Entropy power exp(integral of log S), by grid quadrature.

    Equals the one-step prediction error of the process from its infinite
    past.  Grid points with S <= ZERO_LEVEL are excluded from the log
    integral; if they exceed ZERO_FRACTION_LIMIT of the grid the entropy
    power is 0 by convention.  An identically zero spectrum is an error.
    """
    S = psd_grid(spec)
    positive = S > ZERO_LEVEL
    if not np.any(positive):
        raise DegenerateSpectrumError("spectrum is identically zero")
    if 1.0 - np.mean(positive) > ZERO_FRACTION_LIMIT:
        return 0.0
    return float(np.exp(np.sum(np.log(S[positive])) / spec.grid_size))
