"""Sample statistics and information estimates for simulation output.

Two estimation regimes are deliberately kept apart.  Jointly Gaussian
loop variables get closed-form information measures built from linear
regression residual variances, which are exact for Gaussian processes.
Discrete quantizer streams get plug-in conditional entropies with a
Miller-Madow bias correction.  Nothing here attempts generic
continuous-data mutual information estimation.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalDegeneracyError, ParameterError

LOG2 = float(np.log(2.0))

# A conditional-entropy table is flagged unreliable when the stream is
# shorter than this multiple of the number of occupied cells.
MIN_SAMPLES_PER_CELL = 25

MAX_CONTEXT_ORDER = 8


@dataclass(frozen=True)
class SymbolSequence:
    """A stream of discrete symbol identifiers with a context length."""

    symbols: np.ndarray
    context_order: int = 0

    def __post_init__(self):
        if not (0 <= self.context_order <= MAX_CONTEXT_ORDER):
            raise ParameterError(
                f"context_order must be in [0, {MAX_CONTEXT_ORDER}], "
                f"got {self.context_order}"
            )


@dataclass(frozen=True)
class EntropyEstimate:
    bits: float
    reliable: bool
    occupied_cells: int


@dataclass(frozen=True)
class DirectedInfoEstimate:
    directed_bits: float
    ordinary_bits: float
    context_order: int


def sample_autocorr(signal, max_lag):
    """Normalized autocorrelation at lags 1..max_lag (biased estimator).

    Requires a sample at least 100x longer than the largest lag, and a
    signal with genuinely positive variance.
    """
    x = np.asarray(signal, dtype=float)
    n = x.size
    if max_lag < 1:
        raise ParameterError(f"max_lag must be >= 1, got {max_lag}")
    if n <= 100 * max_lag:
        raise ParameterError(
            f"need more than {100 * max_lag} samples for lag {max_lag}, "
            f"got {n}"
        )
    x = x - np.mean(x)
    r0 = float(np.dot(x, x)) / n
    if r0 <= 1e-300 or r0 <= 1e-15 * np.max(np.abs(x), initial=0.0) ** 2:
        raise NumericalDegeneracyError("signal variance is degenerate")
    return np.array(
        [np.dot(x[:-k], x[k:]) / (n * r0) for k in range(1, max_lag + 1)]
    )


def whiteness_stat(signal, max_lag):
    """Largest |autocorrelation| over lags 1..max_lag against the
    3/sqrt(N) white-noise band.

    Returns (max_abs_rho, threshold, passed).
    """
    rho = sample_autocorr(signal, max_lag)
    n = np.asarray(signal).size
    threshold = 3.0 / np.sqrt(n)
    worst = float(np.max(np.abs(rho)))
    return worst, threshold, bool(worst < threshold)


def dense_codes(columns):
    """Map rows of the stacked integer columns to dense codes.

    Returns (codes, n_distinct).  Columns are combined positionally, so
    the coding is invariant to relabeling any single column.
    """
    if not columns:
        return np.zeros(0, dtype=np.int64), 0
    n = columns[0].size
    codes = np.zeros(n, dtype=np.int64)
    for col in columns:
        _, dense = np.unique(col, return_inverse=True)
        width = int(dense.max()) + 1 if n else 1
        codes = codes * width + dense
    _, codes = np.unique(codes, return_inverse=True)
    return codes, int(codes.max()) + 1 if n else 0


def _plugin_entropy_nats(codes):
    """Plug-in entropy with Miller-Madow correction, in nats.

    Returns (entropy, occupied_cells)."""
    n = codes.size
    counts = np.bincount(codes)
    counts = counts[counts > 0]
    p = counts / n
    h = -float(np.sum(p * np.log(p)))
    return h + (counts.size - 1) / (2 * n), counts.size


def plug_in_entropy(seq):
    """Conditional entropy of a symbol given its previous context_order
    symbols, in bits per symbol.

    Estimated as H(joint) - H(context), each Miller-Madow corrected.
    The reliable flag clears when the stream is short relative to the
    occupied joint table.
    """
    symbols = np.asarray(seq.symbols)
    if symbols.ndim != 1 or symbols.size < 2:
        raise ParameterError("need a 1-D stream of at least 2 symbols")
    m = seq.context_order
    n = symbols.size - m
    current = symbols[m:]
    context_cols = [symbols[m - j - 1 : m - j - 1 + n] for j in range(m)]
    joint, occupied = _plugin_entropy_nats(
        dense_codes(context_cols + [current])[0]
    )
    if m:
        ctx, _ = _plugin_entropy_nats(dense_codes(context_cols)[0])
    else:
        ctx = 0.0
    bits = max(joint - ctx, 0.0) / LOG2
    return EntropyEstimate(
        bits=bits,
        reliable=bool(n >= MIN_SAMPLES_PER_CELL * occupied),
        occupied_cells=occupied,
    )


def conditional_entropy(symbols, context_columns):
    """Conditional entropy H(symbols | context columns) in bits, with
    Miller-Madow correction; shares the plug_in_entropy machinery but
    conditions on arbitrary aligned discrete columns.

    Returns an EntropyEstimate.
    """
    symbols = np.asarray(symbols)
    cols = [np.asarray(c) for c in context_columns]
    for c in cols:
        if c.size != symbols.size:
            raise ParameterError("context columns must align with symbols")
    joint, occupied = _plugin_entropy_nats(dense_codes(cols + [symbols])[0])
    if cols:
        ctx, _ = _plugin_entropy_nats(dense_codes(cols)[0])
    else:
        ctx = 0.0
    bits = max(joint - ctx, 0.0) / LOG2
    return EntropyEstimate(
        bits=bits,
        reliable=bool(symbols.size >= MIN_SAMPLES_PER_CELL * occupied),
        occupied_cells=occupied,
    )


def _residual_covariance(y, x):
    """Covariance of the residual of the linear MMSE estimate of y from
    x (both centered internally).  y: (M, K), x: (M, F) or empty."""
    y = y - np.mean(y, axis=0, keepdims=True)
    if x.shape[1] == 0:
        return (y.T @ y) / y.shape[0]
    x = x - np.mean(x, axis=0, keepdims=True)
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    return (resid.T @ resid) / y.shape[0]


def _logdet(cov):
    sign, logdet = np.linalg.slogdet(np.atleast_2d(cov))
    if sign <= 0:
        raise NumericalDegeneracyError(
            "residual covariance is not positive definite"
        )
    return float(logdet)


def directed_info_estimate(z_blocks, zq_blocks, block_dim, context_order,
                           noise_entropy_nats=None):
    """Directed and ordinary mutual information rates between the input
    stream Z and output stream Zq of a (possibly feedback-embedded)
    additive-noise step, in bits per sample.

    The streams are treated as stationary sequences of K-blocks.  Per
    block step, the directed rate is I(Z_past_and_present; Zq_now |
    Zq_past) and the ordinary rate additionally lets Z_future into the
    conditioning, which is exactly the chain-rule gap between the two
    quantities; conditioning is truncated to context_order blocks on
    each side.  All conditional entropies come from Gaussian linear
    regression residuals, exact for jointly Gaussian loops.

    When noise_entropy_nats is given (the per-block differential entropy
    of the additive noise, known exactly for dithered lattice
    quantization), it replaces the regression estimate of
    h(Zq_now | everything), which removes the Gaussian-shape bias from
    the non-Gaussian noise term.

    Returns a DirectedInfoEstimate; ordinary_bits >= directed_bits by
    construction.
    """
    K = block_dim
    z = np.asarray(z_blocks, dtype=float).reshape(-1, K)
    zq = np.asarray(zq_blocks, dtype=float).reshape(-1, K)
    if z.shape != zq.shape:
        raise ParameterError(
            f"input and output block streams differ: {z.shape} vs {zq.shape}"
        )
    if not (0 <= context_order <= MAX_CONTEXT_ORDER):
        raise ParameterError(
            f"context_order must be in [0, {MAX_CONTEXT_ORDER}], "
            f"got {context_order}"
        )
    c = context_order
    past = list(range(1, c + 1))
    future = [-l for l in past]

    start, stop = c, z.shape[0] - c
    if stop - start < 50:
        raise ParameterError("too few blocks for the requested context")
    y = zq[start:stop]
    zq_past = np.concatenate(
        [zq[start - l : stop - l] for l in past], axis=1
    ) if c else np.zeros((y.shape[0], 0))
    z_causal = np.concatenate(
        [z[start - l : stop - l] for l in [0] + past], axis=1)
    z_future = np.concatenate(
        [z[start - l : stop - l] for l in future], axis=1
    ) if c else np.zeros((y.shape[0], 0))

    cov0 = _residual_covariance(y, zq_past)
    cov1 = _residual_covariance(y, np.concatenate(
        [zq_past, z_causal], axis=1))
    cov2 = _residual_covariance(y, np.concatenate(
        [zq_past, z_causal, z_future], axis=1))

    ld0, ld1, ld2 = _logdet(cov0), _logdet(cov1), _logdet(cov2)
    if noise_entropy_nats is None:
        if ld1 < ld0 - 80.0:
            raise NumericalDegeneracyError(
                "channel noise too small for a stable information estimate"
            )
        directed = 0.5 * (ld0 - ld1)
    else:
        # h(Zq_now | conditioning) is the known noise entropy; the
        # regression term only supplies h(Zq_now | Zq_past).
        directed = (0.5 * ld0 + 0.5 * K * np.log(2 * np.pi * np.e)
                    - noise_entropy_nats)
    ordinary = directed + max(0.5 * (ld1 - ld2), 0.0)
    return DirectedInfoEstimate(
        directed_bits=directed / (K * LOG2),
        ordinary_bits=ordinary / (K * LOG2),
        context_order=c,
    )
