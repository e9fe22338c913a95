"""Entropy-coded dithered lattice quantization.

A dithered quantizer maps each K-block to the nearest lattice point
after adding a dither uniform over the basic cell, and subtracts the
dither again for the reconstruction.  The quantization noise is then
uniform over the mirrored cell and independent of the input, so the
quantizer behaves as an additive-noise channel; the operational rate is
the conditional entropy of the emitted lattice points given the dither.
The same quantizer drops into the predictive loop in place of the
Gaussian noise source, blockwise across parallel loops or across an
interleaved single stream.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError
from .filters import apply_fir, design_prefilter_mag2, realize_filter_pair
from .prediction import noisy_predictor
from .spectra import psd_grid, tabulated_spectrum
from .stats import (
    EntropyEstimate,
    conditional_entropy,
    dense_codes,
    sample_autocorr,
)
from .testchannel import ZQ_AUTOCORR_LAGS, SimResult, synthesize_source
from .waterfill import rdf

# Second moment per dimension of the unit-scale D4 lattice cell.
D4_SECOND_MOMENT = 13.0 / 120.0
D4_CELL_VOLUME = 2.0

DITHER_BINS_PER_DIM = 16


@dataclass(frozen=True)
class Lattice:
    """A scaled root lattice with a closed-form nearest-point rule.

    rule is "cubic" (componentwise rounding, covers the scalar case)
    or "d4" (round all coordinates, fix an odd parity by flipping the
    worst one).  generator rows span the fundamental parallelepiped
    used for dither sampling; cell_volume and second_moment_per_dim
    describe the basic (Voronoi) cell.
    """

    rule: str
    dimension: int
    scale: float
    generator: tuple
    cell_volume: float
    second_moment_per_dim: float
    dither_abs_bound: float

    def scaled(self, factor):
        if factor <= 0:
            raise ParameterError(f"scale factor must be > 0, got {factor}")
        gen = tuple(
            tuple(factor * g for g in row) for row in self.generator
        )
        return replace(
            self,
            scale=self.scale * factor,
            generator=gen,
            cell_volume=self.cell_volume * factor**self.dimension,
            second_moment_per_dim=self.second_moment_per_dim * factor**2,
            dither_abs_bound=self.dither_abs_bound * factor,
        )


def scalar_lattice(delta):
    """The one-dimensional lattice delta * Z."""
    if delta <= 0:
        raise ParameterError(f"delta must be > 0, got {delta}")
    return Lattice(
        rule="cubic",
        dimension=1,
        scale=delta,
        generator=((delta,),),
        cell_volume=delta,
        second_moment_per_dim=delta**2 / 12.0,
        dither_abs_bound=delta / 2.0,
    )


def cubic_lattice(dimension, delta=1.0):
    """The integer lattice delta * Z^K."""
    if dimension < 1:
        raise ParameterError(f"dimension must be >= 1, got {dimension}")
    if delta <= 0:
        raise ParameterError(f"delta must be > 0, got {delta}")
    gen = tuple(
        tuple(delta if i == j else 0.0 for j in range(dimension))
        for i in range(dimension)
    )
    return Lattice(
        rule="cubic",
        dimension=dimension,
        scale=delta,
        generator=gen,
        cell_volume=delta**dimension,
        second_moment_per_dim=delta**2 / 12.0,
        dither_abs_bound=delta / 2.0,
    )


def d4_lattice(scale=1.0):
    """The four-dimensional checkerboard lattice: integer vectors with
    even coordinate sum, scaled."""
    if scale <= 0:
        raise ParameterError(f"scale must be > 0, got {scale}")
    base = ((2.0, 0.0, 0.0, 0.0),
            (1.0, 1.0, 0.0, 0.0),
            (1.0, 0.0, 1.0, 0.0),
            (1.0, 0.0, 0.0, 1.0))
    gen = tuple(tuple(scale * g for g in row) for row in base)
    return Lattice(
        rule="d4",
        dimension=4,
        scale=scale,
        generator=gen,
        cell_volume=D4_CELL_VOLUME * scale**4,
        second_moment_per_dim=D4_SECOND_MOMENT * scale**2,
        # covering radius of unit D4 is 1
        dither_abs_bound=scale,
    )


def _d4_nearest_unit(y):
    """Nearest point of unit D4 for an (..., 4) array.

    Round every coordinate half-to-even; when the rounded sum is odd,
    re-round the coordinate with the largest rounding error away from
    its rounded value (upward on an exact tie).
    """
    y = np.asarray(y, dtype=float)
    f = np.rint(y)
    resid = y - f
    odd = np.asarray(np.sum(f, axis=-1) % 2 != 0)
    if np.any(odd):
        f = np.array(f)
        rows = np.nonzero(odd.reshape(-1))[0]
        flat_f = f.reshape(-1, 4)
        flat_r = resid.reshape(-1, 4)
        worst = np.argmax(np.abs(flat_r[rows]), axis=1)
        step = np.where(flat_r[rows, worst] >= 0.0, 1.0, -1.0)
        flat_f[rows, worst] += step
        f = flat_f.reshape(y.shape)
    return f


def nearest_lattice_point(lattice, point):
    """Nearest lattice point(s) to the given point or (..., K) array."""
    x = np.asarray(point, dtype=float)
    if x.shape[-1:] != (lattice.dimension,) and lattice.dimension != 1:
        raise ParameterError(
            f"last axis must have size {lattice.dimension}, got {x.shape}"
        )
    if lattice.rule == "cubic":
        return lattice.scale * np.rint(x / lattice.scale)
    return lattice.scale * _d4_nearest_unit(x / lattice.scale)


def lattice_point_ids(lattice, points):
    """Dense integer identifiers for an (M, K) array of lattice points.

    Identifiers are stable within a run (relabeling-invariant entropy
    estimates do not care about the actual values)."""
    y = np.rint(np.asarray(points, dtype=float) / lattice.scale)
    cols = [y[:, k].astype(np.int64) for k in range(y.shape[1])]
    return dense_codes(cols)[0]


def sample_dither(lattice, n_blocks, rng):
    """Dither blocks uniform over the basic cell, shape (n_blocks, K).

    Uniform samples over the fundamental parallelepiped are folded into
    the basic cell by subtracting the nearest lattice point; the fold
    preserves uniformity.
    """
    gen = np.asarray(lattice.generator, dtype=float)
    u = rng.random((n_blocks, lattice.dimension)) @ gen
    return u - nearest_lattice_point(lattice, u)


@dataclass(frozen=True)
class EcdqRun:
    """One dithered-quantization pass over a signal.

    z, zq and noise are flat sample streams; dither and q hold the
    per-block values, one row per K-block.  noise == zq - z holds
    exactly, and every noise block lies in the mirrored basic cell.
    """

    z: np.ndarray
    dither: np.ndarray
    q: np.ndarray
    zq: np.ndarray
    noise: np.ndarray
    seed: int
    lattice: Lattice
    rate_bits_per_sample: float | None = None


def ecdq_encode(signal, lattice, seed, dithered=True):
    """Quantize a signal blockwise with subtractive dither.

    The signal length must be a multiple of the lattice dimension.
    dithered=False is a test hook that runs the same path with zero
    dither.
    """
    z = np.asarray(signal, dtype=float)
    if z.ndim != 1:
        raise ParameterError("signal must be one-dimensional")
    k = lattice.dimension
    if z.size % k != 0:
        raise ParameterError(
            f"signal length {z.size} not divisible by block size {k}"
        )
    blocks = z.reshape(-1, k)
    if dithered:
        rng = np.random.default_rng(seed)
        dither = sample_dither(lattice, blocks.shape[0], rng)
    else:
        dither = np.zeros_like(blocks)
    q = nearest_lattice_point(lattice, blocks + dither)
    zq = (q - dither).reshape(-1)
    return EcdqRun(
        z=z,
        dither=dither,
        q=q,
        zq=zq,
        noise=zq - z,
        seed=seed,
        lattice=lattice,
    )


def dither_bin_codes(lattice, dither, bins_per_dim):
    """Quantize dither blocks to a per-block bin code for entropy
    conditioning."""
    bound = lattice.dither_abs_bound
    scaled = (dither / bound + 1.0) * 0.5 * bins_per_dim
    bins = np.clip(np.floor(scaled).astype(np.int64), 0, bins_per_dim - 1)
    cols = [bins[:, j] for j in range(bins.shape[1])]
    return dense_codes(cols)[0]


def ecdq_rate(run, context_order, bins_per_dim=DITHER_BINS_PER_DIM):
    """Operational rate of a dithered-quantizer run in bits per sample.

    Estimated as the conditional entropy of the emitted lattice point
    given the (binned) dither of the same block and the previous
    context_order lattice points, divided by the block dimension.  The
    reliable flag clears when the context table is undersampled.
    """
    if context_order < 0:
        raise ParameterError(
            f"context_order must be >= 0, got {context_order}"
        )
    if bins_per_dim < 1:
        raise ParameterError(
            f"bins_per_dim must be >= 1, got {bins_per_dim}"
        )
    ids = lattice_point_ids(run.lattice, run.q)
    dbins = dither_bin_codes(run.lattice, run.dither, bins_per_dim)
    c = context_order
    m = ids.size - c
    if m < 100:
        raise ParameterError("too few blocks for the requested context")
    cols = [dbins[c:]]
    for j in range(1, c + 1):
        cols.append(ids[c - j : c - j + m])
    est = conditional_entropy(ids[c:], cols)
    return EntropyEstimate(
        bits=est.bits / run.lattice.dimension,
        reliable=est.reliable,
        occupied_cells=est.occupied_cells,
    )


@dataclass(frozen=True)
class VqDpcmResult:
    """Joint result of a lattice-quantized predictive loop run.

    run holds the quantizer-side streams restricted to the valid
    region (block steps past the warm-up), with block t carrying the
    prediction errors of the parallel loops at that step."""

    per_source: tuple
    rate: EntropyEstimate
    noise_var: float
    theta: float
    lattice: Lattice
    run: EcdqRun


def _vq_loop(u_rows, dither, coeffs, lattice):
    """Predictive loops advanced in lockstep, one row per loop, with
    the K prediction errors of each step quantized as one block.

    Returns (z_rows, zq_rows, v_rows, q)."""
    k, b = u_rows.shape
    order = len(coeffs)
    crev = np.ascontiguousarray(coeffs[::-1], dtype=float)
    vpad = np.zeros((k, b + order))
    z = np.empty((k, b))
    zq = np.empty((k, b))
    q = np.empty((b, k))
    scale = lattice.scale
    is_d4 = lattice.rule == "d4"
    for t in range(b):
        uhat = vpad[:, t : t + order] @ crev
        zt = u_rows[:, t] - uhat
        w = (zt + dither[t]) / scale
        if is_d4:
            f = np.rint(w)
            if f.sum() % 2 != 0:
                r = w - f
                worst = np.argmax(np.abs(r))
                f[worst] += 1.0 if r[worst] >= 0.0 else -1.0
            qt = scale * f
        else:
            qt = scale * np.rint(w)
        zqt = qt - dither[t]
        z[:, t] = zt
        zq[:, t] = zqt
        q[t] = qt
        vpad[:, order + t] = uhat + zqt
    return z, zq, vpad[:, order:], q


def _per_source_result(x, y, z, zq, theta, rate_bits, start, stop):
    sl = slice(start, stop)
    err = y[sl] - x[sl]
    var_z = float(np.var(z[sl]))
    return SimResult(
        measured_d=float(np.mean(err * err)),
        var_z=var_z,
        var_zq=float(np.var(zq[sl])),
        mi_scalar_bits=float(0.5 * np.log2(1.0 + var_z / theta)),
        zq_autocorr=sample_autocorr(zq[sl], ZQ_AUTOCORR_LAGS),
        theta=theta,
        rate_theory_bits=rate_bits,
        valid_start=start,
        valid_stop=stop,
    )


def vq_dpcm_run(configs, lattice, interleave_depth=1, context_order=2,
                bins_per_dim=None, scale_to_target=True):
    """Predictive coding with a lattice quantizer in the loop.

    Pass K configs for K parallel loops quantized jointly, or a single
    config with interleave_depth = K to split one stream into K
    contiguous segments that advance in lockstep.  By default the
    lattice is rescaled so its cell second moment per dimension equals
    the water level of the shared target distortion;
    scale_to_target=False keeps the given scale, in which case the
    loop noise no longer matches the water level and the distortion
    target is missed accordingly.  Per-source statistics use
    segment-local valid bounds; the rate estimate conditions on the
    dither bin and context_order previous blocks.
    """
    if isinstance(configs, (list, tuple)):
        config_list = list(configs)
    else:
        config_list = [configs]
    k = lattice.dimension
    if len(config_list) == 1 and interleave_depth > 1:
        interleaved = True
        if interleave_depth != k:
            raise ParameterError(
                f"interleave depth {interleave_depth} does not match "
                f"lattice dimension {k}"
            )
    else:
        interleaved = False
        if len(config_list) != k:
            raise ParameterError(
                f"got {len(config_list)} sources for lattice dimension {k}"
            )
    base = config_list[0]
    base.validate()
    for cfg in config_list[1:]:
        cfg.validate()
        if (cfg.source, cfg.D, cfg.L, cfg.T, cfg.N) != (
            base.source, base.D, base.L, base.T, base.N
        ):
            raise ParameterError(
                "parallel sources must share spectrum and loop parameters"
            )

    wf = rdf(base.source, base.D)
    theta = wf.theta
    if scale_to_target:
        lat = lattice.scaled(np.sqrt(theta / lattice.second_moment_per_dim))
    else:
        lat = lattice
    pair = realize_filter_pair(
        design_prefilter_mag2(base.source, theta), base.T
    )
    filtered = np.maximum(psd_grid(base.source) - theta, 0.0)
    if base.L:
        coeffs = np.asarray(
            noisy_predictor(tabulated_spectrum(filtered), theta, base.L).coeffs,
            dtype=float,
        )
    else:
        coeffs = np.zeros(0)

    if interleaved:
        if base.N % k != 0:
            raise ParameterError(
                f"N = {base.N} not divisible by interleave depth {k}"
            )
        b = base.N // k
        seeds = np.random.SeedSequence(base.seed).spawn(2)
        x_streams = [synthesize_source(base.source, base.N, seeds[0])]
        u_full = apply_fir(pair.pre_taps, pair.delay, x_streams[0])
        u_rows = u_full.reshape(k, b)
        dither_rng = np.random.default_rng(seeds[1])
    else:
        b = base.N
        x_streams = []
        for cfg in config_list:
            child = np.random.SeedSequence(cfg.seed).spawn(2)[0]
            x_streams.append(synthesize_source(cfg.source, cfg.N, child))
        u_rows = np.stack(
            [apply_fir(pair.pre_taps, pair.delay, x) for x in x_streams]
        )
        dither_rng = np.random.default_rng(
            np.random.SeedSequence(base.seed).spawn(2)[1]
        )

    dither = sample_dither(lat, b, dither_rng)
    z_rows, zq_rows, v_rows, q = _vq_loop(u_rows, dither, coeffs, lat)

    start = max(base.resolved_burn_in(), base.T)
    stop = b - base.T
    if stop - start < 100 * ZQ_AUTOCORR_LAGS:
        raise ParameterError("too few valid samples per segment")

    per_source = []
    if interleaved:
        v_full = v_rows.reshape(-1)
        y_full = apply_fir(pair.post_taps, pair.delay, v_full)
        x = x_streams[0]
        mask = np.zeros(base.N, dtype=bool)
        for s in range(k):
            mask[s * b + start : s * b + stop] = True
        err = y_full[mask] - x[mask]
        z_flat = z_rows.reshape(-1)
        zq_flat = zq_rows.reshape(-1)
        var_z = float(np.var(z_flat[mask]))
        per_source.append(SimResult(
            measured_d=float(np.mean(err * err)),
            var_z=var_z,
            var_zq=float(np.var(zq_flat[mask])),
            mi_scalar_bits=float(0.5 * np.log2(1.0 + var_z / theta)),
            zq_autocorr=sample_autocorr(zq_rows[0, start:stop],
                                        ZQ_AUTOCORR_LAGS),
            theta=theta,
            rate_theory_bits=wf.rate_bits,
            valid_start=start,
            valid_stop=stop,
        ))
        noise_var = float(np.var(zq_flat[mask] - z_flat[mask]))
    else:
        for idx in range(k):
            y = apply_fir(pair.post_taps, pair.delay, v_rows[idx])
            per_source.append(_per_source_result(
                x_streams[idx], y, z_rows[idx], zq_rows[idx],
                theta, wf.rate_bits, start, stop,
            ))
        noise = (zq_rows - z_rows)[:, start:stop]
        noise_var = float(np.var(noise))

    z_valid = z_rows[:, start:stop].T.reshape(-1)
    zq_valid = zq_rows[:, start:stop].T.reshape(-1)
    run = EcdqRun(
        z=z_valid,
        dither=dither[start:stop],
        q=q[start:stop],
        zq=zq_valid,
        noise=zq_valid - z_valid,
        seed=base.seed,
        lattice=lat,
    )
    if bins_per_dim is None:
        bins_per_dim = DITHER_BINS_PER_DIM if k == 1 else 2
    rate = ecdq_rate(run, context_order, bins_per_dim)
    return VqDpcmResult(
        per_source=tuple(per_source),
        rate=rate,
        noise_var=noise_var,
        theta=theta,
        lattice=lat,
        run=run,
    )
