"""Water-filling shaping filters and their FIR realizations.

The ideal pre-filter has magnitude-squared response
|H1(f)|^2 = 1 - min(theta, S(f)) / S(f)  (with 0/0 read as 1, so a
spectral zero gives a zero response), and the post-filter is its complex
conjugate.  We realize both at zero phase: the pre-filter taps are the
tapered inverse transform of |H1|, symmetric about a group delay of
(T-1)/2 samples, and the post-filter is the index reversal of the
pre-filter, which for symmetric taps is the same sequence.  Zero phase
makes the conjugate relation exact on the grid and keeps delay
bookkeeping trivial.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import ParameterError
from .spectra import grid_frequencies, psd_grid


@dataclass(frozen=True)
class FilterPair:
    """Realized pre/post filter pair.

    mag2_grid is the design target |H1|^2 on the frequency grid;
    spectral_error is the achieved L2 distance between |H1_fir|^2 and
    that target.
    """

    mag2_grid: np.ndarray
    pre_taps: np.ndarray
    post_taps: np.ndarray
    delay: int
    spectral_error: float


def design_prefilter_mag2(spec, theta):
    """Target |H1|^2 = 1 - min(theta, S)/S on the grid (0/0 -> 1)."""
    if theta <= 0:
        raise ParameterError(f"water level must be positive, got {theta}")
    S = psd_grid(spec)
    out = np.zeros_like(S)
    live = S > 0
    out[live] = 1.0 - np.minimum(theta, S[live]) / S[live]
    # S = 0 points keep 0: min(theta,0)/0 is 0/0, read as 1.
    return np.clip(out, 0.0, 1.0)


def fir_response(taps, grid_size):
    """Frequency response of an FIR filter on the grid, evaluated with
    the first tap at time 0 (linear phase is irrelevant to magnitudes)."""
    f = grid_frequencies(grid_size)
    n = np.arange(len(taps))
    return np.exp(-2j * np.pi * np.outer(f, n)) @ np.asarray(taps, float)


def realize_filter_pair(mag2_grid, num_taps):
    """Realize the filter pair as T-tap zero-phase FIR filters.

    The impulse response of |H1| is computed on the grid, truncated to
    T taps centered on delay (T-1)/2, and shaped by a raised-cosine
    taper to suppress truncation ripple near water-line kinks.

    Args:
        mag2_grid: target |H1|^2 at the grid frequencies, values in [0, 1].
        num_taps: odd tap count T <= grid_size.

    Returns:
        FilterPair; post_taps is the reversal of pre_taps and the
        reported spectral_error is the L2 grid distance between the
        achieved |H1_fir|^2 and the target.
    """
    mag2_grid = np.asarray(mag2_grid, dtype=float)
    G = mag2_grid.size
    if num_taps % 2 == 0 or num_taps < 1:
        raise ParameterError(f"tap count must be odd, got {num_taps}")
    if num_taps > G:
        raise ParameterError(
            f"tap count {num_taps} exceeds grid size {G}"
        )
    delta = (num_taps - 1) // 2
    mag = np.sqrt(np.clip(mag2_grid, 0.0, None))
    f = grid_frequencies(G)
    n = np.arange(-delta, delta + 1)
    # Inverse transform of the real even response: h[n] = mean(mag * cos)
    h = (np.cos(2 * np.pi * np.outer(n, f)) @ mag) / G
    # Raised-cosine taper, 1 at the center and rolling off to the ends.
    taper = 0.5 * (1.0 + np.cos(np.pi * n / (delta + 1)))
    h = h * taper
    resp = fir_response(h, G)
    err = float(np.sqrt(np.mean((np.abs(resp) ** 2 - mag2_grid) ** 2)))
    h.flags.writeable = False
    h2 = h[::-1]
    return FilterPair(mag2_grid=mag2_grid, pre_taps=h, post_taps=h2,
                      delay=delta, spectral_error=err)


def apply_fir(taps, delay, signal):
    """Convolve and realign so output sample n sits opposite input
    sample n.

    The first and last len(taps) output samples carry edge transients
    and should be excluded from any stationary measurement.
    """
    signal = np.asarray(signal, dtype=float)
    if signal.size <= len(taps):
        raise ParameterError(
            f"signal length {signal.size} must exceed tap count {len(taps)}"
        )
    full = fftconvolve(signal, taps)
    return full[delay : delay + signal.size]
