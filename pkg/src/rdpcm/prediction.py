"""Optimal linear prediction from Toeplitz normal equations.

levinson() solves the clean one-step prediction problem by the
Levinson-Durbin recursion.  noisy_predictor() handles the case where the
predictor only sees a noisy version V_n = U_n + N_n of the process: the
optimal predictor of U from past V equals the optimal predictor of V
from its own past, so the same recursion applies with r_V[0] = r_U[0] +
theta.  Infinite-order limits come from the entropy power, never from
extrapolating finite orders.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalDegeneracyError, ParameterError
from .spectra import autocorrelation, entropy_power, psd_grid, tabulated_spectrum

# Reflection coefficients this close to unit magnitude mean the
# autocorrelation is numerically on the boundary of positive
# definiteness; treat as degenerate rather than produce garbage.
REFLECTION_LIMIT = 1.0 - 1e-12


@dataclass(frozen=True)
class PredictorCoeffs:
    """Order-L one-step predictor: X_n ~ sum_i coeffs[i-1] X_{n-i}."""

    order: int
    coeffs: np.ndarray
    mse: float


def levinson(r):
    """Minimum-MSE one-step predictor from autocorrelation r[0..L].

    Args:
        r: autocorrelation sequence; the solved order is len(r) - 1.

    Returns:
        PredictorCoeffs with the coefficients minimizing
        E(X_n - sum_i a_i X_{n-i})^2 and the achieved minimum.

    Raises:
        NumericalDegeneracyError: r[0] <= 0, or a reflection coefficient
            reaches unit magnitude (non-PSD sequence).
    """
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size < 1:
        raise ParameterError("autocorrelation must be a nonempty 1-D sequence")
    if r[0] <= 0:
        raise NumericalDegeneracyError(f"r[0] must be positive, got {r[0]}")
    order = r.size - 1
    a = np.zeros(order)
    mse = float(r[0])
    for i in range(1, order + 1):
        k = (r[i] - np.dot(a[: i - 1], r[i - 1 : 0 : -1])) / mse
        if abs(k) > REFLECTION_LIMIT:
            raise NumericalDegeneracyError(
                f"reflection coefficient {k:.6g} at order {i}: "
                "autocorrelation is not positive definite"
            )
        a[: i - 1] = a[: i - 1] - k * a[: i - 1][::-1]
        a[i - 1] = k
        mse *= 1.0 - k * k
    return PredictorCoeffs(order=order, coeffs=a, mse=mse)


def noisy_predictor(spec_u, theta, order):
    """Optimal order-L predictor of U_n from the past of V_n = U_n + N_n,
    where N is white with variance theta.

    Args:
        spec_u: spectrum of the clean process U.
        theta: variance of the additive white observation noise.
        order: predictor order L >= 1.

    Returns:
        PredictorCoeffs whose mse field is the prediction error of U
        itself, i.e. E(U_n - Uhat_n)^2 = mse_V - theta.
    """
    if order < 1:
        raise ParameterError(f"predictor order must be >= 1, got {order}")
    if theta <= 0:
        raise ParameterError(f"noise variance must be positive, got {theta}")
    r_v = autocorrelation(spec_u, order).copy()
    r_v[0] += theta
    solved = levinson(r_v)
    sigma2 = solved.mse - theta
    if sigma2 < -1e-9 * r_v[0]:
        raise NumericalDegeneracyError(
            f"noisy prediction error {solved.mse} fell below the noise "
            f"floor {theta}"
        )
    return PredictorCoeffs(order=order, coeffs=solved.coeffs,
                           mse=max(sigma2, 0.0))


def sigma_infinity(spec, theta):
    """Infinite-order prediction error of U from the noisy past, for the
    quantization loop fed by source spectrum S and water level theta.

    Inside the loop the noisy observation V has spectrum max(theta, S),
    whose entropy power equals sigma_inf^2 + theta; this returns
    sigma_inf^2 = entropy_power(max(theta, S)) - theta.
    """
    if theta <= 0:
        raise ParameterError(f"water level must be positive, got {theta}")
    S = psd_grid(spec)
    pe_v = entropy_power(tabulated_spectrum(np.maximum(theta, S)))
    return max(pe_v - theta, 0.0)
