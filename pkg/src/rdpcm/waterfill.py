"""Water-filling solutions of the quadratic rate-distortion problem.

For a source spectrum S and target distortion D, the water level theta
satisfies integral min(theta, S(f)) df = D, the distortion spectrum is
min(theta, S), and the rate is integral over {S > theta} of
(1/2) log(S/theta).  Rates are kept in nats internally; only the
``*_bits`` helpers and the CLI convert.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrumError, DomainError
from .spectra import entropy_power, psd_grid, tabulated_spectrum, variance

# Bisection stops when the distortion residual drops below this fraction
# of the source variance.
WATERFILL_RTOL = 1e-10
_MAX_BISECT = 200

LOG2 = float(np.log(2.0))


def nats_to_bits(x):
    return x / LOG2


@dataclass(frozen=True)
class WaterFillSolution:
    theta: float
    rate_nats: float
    distortion_total: float
    distortion_spectrum: np.ndarray
    slb_tight: bool

    @property
    def rate_bits(self):
        return nats_to_bits(self.rate_nats)


def water_level_for_distortion(spec, D):
    """Water level theta with integral min(theta, S) = D.

    Valid for 0 < D <= variance(spec).  D equal to the variance returns
    theta = max(S), the smallest level that floods the whole spectrum.
    Solved by bisection on theta; the distortion integral is monotone in
    theta but kinked wherever theta crosses a spectrum level, so
    bisection is the robust choice.
    """
    S = psd_grid(spec)
    var = float(np.mean(S))
    if not (0.0 < D <= var):
        raise DomainError(
            f"distortion {D} outside valid interval (0, {var:.12g}]",
            valid_interval=(0.0, var),
        )
    s_max = float(np.max(S))
    if D == var:
        return s_max

    tol = WATERFILL_RTOL * var

    def total(theta):
        return float(np.mean(np.minimum(theta, S)))

    lo, hi = 0.0, s_max
    theta = 0.5 * (lo + hi)
    for _ in range(_MAX_BISECT):
        theta = 0.5 * (lo + hi)
        resid = total(theta) - D
        if abs(resid) < tol:
            break
        if resid > 0:
            hi = theta
        else:
            lo = theta
    return theta


def rdf(spec, D):
    """Rate-distortion point at distortion D, as a WaterFillSolution."""
    S = psd_grid(spec)
    theta = water_level_for_distortion(spec, D)
    dist_spec = np.minimum(theta, S)
    above = S > theta
    rate = 0.0
    if np.any(above):
        rate = float(np.sum(0.5 * np.log(S[above] / theta)) / spec.grid_size)
    s_min = float(np.min(S))
    return WaterFillSolution(
        theta=theta,
        rate_nats=max(rate, 0.0),
        distortion_total=float(np.mean(dist_spec)),
        distortion_spectrum=dist_spec,
        slb_tight=bool(D <= s_min * (1 + 1e-12)),
    )


def slb(spec, D):
    """Lower bound max(0, (1/2) log(Pe/D)) in nats.

    Pe is the entropy power; the bound meets the rate-distortion
    function exactly when D does not exceed the spectral minimum.
    """
    if D <= 0:
        raise DomainError(f"distortion must be positive, got {D}",
                          valid_interval=(0.0, np.inf))
    pe = entropy_power(spec)
    if pe <= 0.0:
        return 0.0
    return max(0.0, 0.5 * float(np.log(pe / D)))


def prediction_gains(spec):
    """Distortion gains of closed-loop and open-loop prediction over
    memoryless coding, at high resolution.

    Returns (g_closed, g_open, ratio) where

    * g_closed = variance / entropy power, the gain when the predictor
      sees the quantized signal (closed loop);
    * g_open = variance / (integral sqrt(S) df)^2, the gain when the
      innovations are quantized outside the loop (open loop);
    * ratio = g_closed / g_open >= 1, the closed-over-open advantage.
    """
    S = psd_grid(spec)
    pe = entropy_power(spec)
    if pe <= 0.0:
        raise DegenerateSpectrumError(
            "prediction gains need a spectrum with positive entropy power"
        )
    var = float(np.mean(S))
    half_power = float(np.mean(np.sqrt(S))) ** 2
    g_closed = var / pe
    g_open = var / half_power
    return g_closed, g_open, g_closed / g_open


def half_whitened_spectrum(spec):
    """The spectrum sqrt(S) as a tabulated spectrum.

    A process with this spectrum has variance integral sqrt(S) df and
    entropy power sqrt(Pe), which gives an independent route to the
    closed-over-open prediction gain ratio: ratio =
    (variance / entropy_power)^2 of the half-whitened spectrum.
    """
    return tabulated_spectrum(np.sqrt(psd_grid(spec)))
