"""End-to-end acceptance checks.

Each check runs a fixed scenario and returns a structured record with
the measured numbers and a pass flag; the test suite asserts the flags
one by one and the CLI aggregates the records into a report.  Heavy
simulation blocks are cached per seed so overlapping checks share runs.

Tolerances are module constants; they are deliberately not
configurable anywhere else.
"""

import time
from dataclasses import dataclass, replace
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.linalg import solve_toeplitz

from .dfe import ChannelModel, dfe_simulate, error_entropy_power
from .ecdq import (
    d4_lattice,
    ecdq_encode,
    ecdq_rate,
    nearest_lattice_point,
    scalar_lattice,
    vq_dpcm_run,
)
from .prediction import levinson
from .spectra import (
    ar_spectrum,
    autocorrelation,
    entropy_power,
    psd_grid,
    tabulated_spectrum,
    variance,
    white_spectrum,
)
from .stats import directed_info_estimate, whiteness_stat
from .testchannel import (
    SimConfig,
    finite_order_mi,
    run_forward_equivalent,
    run_predictive_channel,
    synthesize_source,
)
from .waterfill import half_whitened_spectrum, prediction_gains, rdf

DEFAULT_SEED = 7

AR_COEFF = 0.9
D_LADDER = (0.05, 0.1, 0.25, 1.0, 3.0)
LADDER_L = 64
LADDER_T = 257
LADDER_N = 1_000_000

RDF_WHITE_TOL_BITS = 1e-6
RDF_SLB_TOL_BITS = 1e-4
RDF_RUNTIME_S = 1.0
DISTORTION_RTOL = 0.02
LADDER_RUNTIME_S = 30.0
RATE_TOL_BITS = 0.03
LOOP_IDENTITY_TOL = 1e-9
VAR_ZQ_RTOL = 0.02
FINITE_ORDER_TOL_BITS = 0.01
ECDQ_N = 600_000
ECDQ_GAP_BITS = 0.254
ECDQ_SLACK_BITS = 0.05
ECDQ_NOISE_RTOL = 0.01
DIRECTED_SLACK_BITS = 0.05
NO_FEEDBACK_AGREE_BITS = 0.02
DFE_N = 1_000_000
DFE_TOL_BITS = 0.03
DFE_EPOWER_RTOL = 0.03
DFE_RUNTIME_S = 30.0
GAINS_TOL = 1e-9
ORACLE_TOL = 1e-9
D4_ORACLE_POINTS = 10_000


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict


def _ar_source():
    return ar_spectrum((AR_COEFF,), 1.0)


@dataclass(frozen=True)
class _LadderRun:
    d: float
    result: object
    z_max_rho: float
    z_threshold: float


@lru_cache(maxsize=2)
def _ladder(seed):
    """The five-point distortion ladder on the AR source, traces
    reduced to the statistics the checks need."""
    t0 = time.perf_counter()
    src = _ar_source()
    runs = []
    for i, d in enumerate(D_LADDER):
        cfg = SimConfig(
            source=src, D=d, seed=seed + i,
            L=LADDER_L, T=LADDER_T, N=LADDER_N, keep_traces=True,
        )
        res = run_predictive_channel(cfg)
        z = res.traces["Z"][res.valid_start : res.valid_stop]
        z_rho, z_thr, _ = whiteness_stat(z, 20)
        runs.append(_LadderRun(
            d=d,
            result=replace(res, traces=None),
            z_max_rho=z_rho,
            z_threshold=z_thr,
        ))
    return tuple(runs), time.perf_counter() - t0


@dataclass(frozen=True)
class _EcdqRun:
    d: float
    result: object
    rate_bits: float
    rate_reliable: bool
    noise_var: float
    theta: float
    delta: float
    run: object


@lru_cache(maxsize=2)
def _ecdq_ladder(seed):
    """Scalar dithered quantization inside the loop, across the same
    distortion ladder."""
    src = _ar_source()
    runs = []
    for i, d in enumerate(D_LADDER):
        cfg = SimConfig(
            source=src, D=d, seed=seed + 50 + i,
            L=LADDER_L, T=LADDER_T, N=ECDQ_N,
        )
        out = vq_dpcm_run(cfg, scalar_lattice(1.0), 1, context_order=0)
        runs.append(_EcdqRun(
            d=d,
            result=out.per_source[0],
            rate_bits=out.rate.bits,
            rate_reliable=out.rate.reliable,
            noise_var=out.noise_var,
            theta=out.theta,
            delta=out.lattice.scale,
            run=out.run,
        ))
    return tuple(runs)


def criterion_1(seed=DEFAULT_SEED):
    """Water-filling exactness on the white and SLB-tight cases."""
    t0 = time.perf_counter()
    white_err = abs(rdf(white_spectrum(1.0), 0.25).rate_bits - 1.0)
    slb_value = 0.5 * np.log2(10.0)
    ar_err = abs(rdf(_ar_source(), 0.1).rate_bits - slb_value)
    elapsed = time.perf_counter() - t0
    passed = (
        white_err < RDF_WHITE_TOL_BITS
        and ar_err < RDF_SLB_TOL_BITS
        and elapsed < RDF_RUNTIME_S
    )
    return CriterionResult(1, "water-filling exactness", bool(passed), {
        "white_error_bits": white_err,
        "slb_tight_error_bits": ar_err,
        "elapsed_s": elapsed,
    })


def criterion_2(seed=DEFAULT_SEED):
    """Loop distortion matches the target across the ladder."""
    runs, elapsed = _ladder(seed)
    rel = {r.d: abs(r.result.measured_d / r.d - 1.0) for r in runs}
    passed = (
        all(v <= DISTORTION_RTOL for v in rel.values())
        and elapsed < LADDER_RUNTIME_S
    )
    return CriterionResult(2, "loop distortion across the ladder",
                           bool(passed), {
        "relative_errors": {str(k): v for k, v in rel.items()},
        "elapsed_s": elapsed,
    })


def criterion_3(seed=DEFAULT_SEED):
    """Scalar information rate of the loop matches the theory curve."""
    runs, _ = _ladder(seed)
    gaps = {
        r.d: abs(r.result.mi_scalar_bits - r.result.rate_theory_bits)
        for r in runs
    }
    passed = all(v <= RATE_TOL_BITS for v in gaps.values())
    return CriterionResult(3, "loop information rate", bool(passed), {
        "gap_bits": {str(k): v for k, v in gaps.items()},
    })


def criterion_4(seed=DEFAULT_SEED):
    """Closed loop and open forward form produce the same channel
    output under shared noise."""
    cfg = SimConfig(
        source=_ar_source(), D=0.1, seed=seed + 90,
        L=32, T=129, N=100_000, keep_traces=True,
    )
    a = run_predictive_channel(cfg)
    b = run_forward_equivalent(cfg)
    dev_v = float(np.max(np.abs(a.traces["V"] - b.traces["V"])))
    dev_y = float(np.max(np.abs(a.traces["Y"] - b.traces["Y"])))
    passed = dev_v < LOOP_IDENTITY_TOL and dev_y < LOOP_IDENTITY_TOL
    return CriterionResult(4, "loop equals forward channel",
                           bool(passed), {
        "max_dev_v": dev_v,
        "max_dev_y": dev_y,
    })


def criterion_5(seed=DEFAULT_SEED):
    """The noisy prediction error is white with the entropy-power
    variance; the raw prediction error is not white in the tight
    regime."""
    runs, _ = _ladder(seed)
    src = _ar_source()
    s = psd_grid(src)
    s_min = float(np.min(s))
    details = {}
    ok = True
    for r in runs:
        theta = r.result.theta
        pe = entropy_power(tabulated_spectrum(np.maximum(s, theta)))
        var_rel = abs(r.result.var_zq / pe - 1.0)
        n_valid = r.result.valid_stop - r.result.valid_start
        zq_rho = float(np.max(np.abs(r.result.zq_autocorr)))
        zq_white = zq_rho < 3.0 / np.sqrt(n_valid)
        entry = {
            "var_zq_rel_error": var_rel,
            "zq_max_rho": zq_rho,
            "zq_white": bool(zq_white),
        }
        ok = ok and var_rel <= VAR_ZQ_RTOL and zq_white
        if r.d <= s_min:
            z_fails = r.z_max_rho > r.z_threshold
            entry["z_max_rho"] = r.z_max_rho
            entry["z_nonwhite"] = bool(z_fails)
            ok = ok and z_fails
        details[str(r.d)] = entry
    return CriterionResult(5, "loop output whiteness", bool(ok), details)


def criterion_6(seed=DEFAULT_SEED):
    """Finite-order information decreases with predictor order and
    meets the theory curve at order 128."""
    src = _ar_source()
    orders = [1, 2, 4, 8, 16, 32, 64, 128]
    values = [finite_order_mi(src, 0.1, m) for m in orders]
    monotone = all(
        values[i + 1] <= values[i] + 1e-12 for i in range(len(values) - 1)
    )
    target = rdf(src, 0.1).rate_bits
    gap = abs(values[-1] - target)
    passed = monotone and gap <= FINITE_ORDER_TOL_BITS
    return CriterionResult(6, "finite-order information ladder",
                           bool(passed), {
        "orders": orders,
        "values_bits": values,
        "monotone": bool(monotone),
        "gap_at_128_bits": gap,
    })


def criterion_7(seed=DEFAULT_SEED):
    """Scalar dithered quantization in the loop stays within the
    quarter-bit band above the theory rate, with cell-exact noise."""
    runs = _ecdq_ladder(seed)
    details = {}
    ok = True
    for r in runs:
        bound = r.result.rate_theory_bits + ECDQ_GAP_BITS + ECDQ_SLACK_BITS
        noise_rel = abs(r.noise_var / r.theta - 1.0)
        entry = {
            "rate_bits": r.rate_bits,
            "bound_bits": bound,
            "noise_var_rel_error": noise_rel,
            "rate_reliable": bool(r.rate_reliable),
        }
        ok = ok and r.rate_bits <= bound and noise_rel <= ECDQ_NOISE_RTOL
        details[str(r.d)] = entry
    # independence on a loop-free pass
    src_stream = synthesize_source(_ar_source(), ECDQ_N, seed + 60)
    free = ecdq_encode(src_stream,
                       scalar_lattice(np.sqrt(12 * runs[2].theta)),
                       seed + 61)
    corr = float(np.corrcoef(free.z, free.noise)[0, 1])
    corr_ok = abs(corr) < 3.0 / np.sqrt(free.z.size)
    details["input_noise_corr"] = corr
    ok = ok and corr_ok
    return CriterionResult(7, "scalar dithered-quantizer rate bound",
                           bool(ok), details)


def criterion_8(seed=DEFAULT_SEED):
    """Information ordering around the quantizer: ordinary at least
    directed, directed at least the measured rate, and both collapse
    together without feedback."""
    fb = _ecdq_ladder(seed)[1]  # D = 0.1 run
    est = directed_info_estimate(
        fb.run.z, fb.run.zq, 1, 2,
        noise_entropy_nats=float(np.log(fb.delta)),
    )
    rate2 = ecdq_rate(fb.run, 2)
    fb_ok = (
        est.ordinary_bits >= est.directed_bits
        and est.directed_bits >= rate2.bits - DIRECTED_SLACK_BITS
    )
    stream = synthesize_source(_ar_source(), ECDQ_N, seed + 62)
    free = ecdq_encode(stream, scalar_lattice(fb.delta), seed + 63)
    est_free = directed_info_estimate(
        free.z, free.zq, 1, 2,
        noise_entropy_nats=float(np.log(fb.delta)),
    )
    agree = abs(est_free.ordinary_bits - est_free.directed_bits)
    passed = fb_ok and agree <= NO_FEEDBACK_AGREE_BITS
    return CriterionResult(8, "directed-information ordering",
                           bool(passed), {
        "feedback_directed_bits": est.directed_bits,
        "feedback_ordinary_bits": est.ordinary_bits,
        "feedback_rate_bits": rate2.bits,
        "context_order": est.context_order,
        "no_feedback_gap_bits": agree,
    })


def criterion_9(seed=DEFAULT_SEED):
    """Genie-aided prediction receiver reaches capacity on the flat
    and two-tap channels."""
    t0 = time.perf_counter()
    cases = {
        "flat": ChannelModel((1.0,), white_spectrum(1.0), 3.0),
        "two_tap": ChannelModel((1.0, 0.5), white_spectrum(1.0), 4.0),
    }
    details = {}
    ok = True
    for idx, (name, ch) in enumerate(cases.items()):
        sol = dfe_simulate(ch, DFE_N, seed + 70 + idx, LADDER_L)
        gap = abs(sol.mi_scalar_bits - sol.capacity_bits)
        pe = error_entropy_power(sol)
        pe_rel = abs(sol.sigma_e2 / pe - 1.0)
        details[name] = {
            "mi_bits": sol.mi_scalar_bits,
            "capacity_bits": sol.capacity_bits,
            "gap_bits": gap,
            "sigma_e2_rel_error": pe_rel,
        }
        ok = ok and gap <= DFE_TOL_BITS and pe_rel <= DFE_EPOWER_RTOL
    elapsed = time.perf_counter() - t0
    details["elapsed_s"] = elapsed
    ok = ok and elapsed < DFE_RUNTIME_S
    return CriterionResult(9, "prediction receiver capacity",
                           bool(ok), details)


def criterion_10(seed=DEFAULT_SEED):
    """Closed-to-open loop gain ratio computed two independent ways."""
    src = _ar_source()
    closed, open_loop, ratio = prediction_gains(src)
    half = half_whitened_spectrum(src)
    ratio_alt = (variance(half) / entropy_power(half)) ** 2
    diff = abs(ratio - ratio_alt)
    passed = diff <= GAINS_TOL and ratio > 1.0
    return CriterionResult(10, "prediction gain consistency",
                           bool(passed), {
        "closed_loop_gain": closed,
        "open_loop_gain": open_loop,
        "ratio": ratio,
        "ratio_two_route_diff": diff,
    })


def criterion_11(seed=DEFAULT_SEED):
    """Recursive solver and nearest-point rule against brute force."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    g = 512
    fold = np.minimum(np.arange(g), g - np.arange(g))
    for _ in range(100):
        order = int(rng.integers(1, 17))
        half = rng.uniform(0.05, 2.0, g // 2 + 1)
        spec = tabulated_spectrum(half[fold])
        r = autocorrelation(spec, order)
        sol = levinson(r)
        direct = solve_toeplitz((r[:-1], r[:-1]), r[1:])
        worst = max(worst, float(np.max(np.abs(
            np.asarray(sol.coeffs) - direct
        ))))
    lat = d4_lattice(1.0)
    pts = rng.uniform(-2.5, 2.5, (D4_ORACLE_POINTS, 4))
    got = nearest_lattice_point(lat, pts)
    base = np.rint(pts)
    offsets = np.array(
        [o for o in product(range(-2, 3), repeat=4)], dtype=float
    )
    cands = base[:, None, :] + offsets[None, :, :]
    odd = np.sum(cands, axis=2) % 2 != 0
    d2 = np.sum((cands - pts[:, None, :]) ** 2, axis=2)
    d2[odd] = np.inf
    best = np.min(d2, axis=1)
    got_d2 = np.sum((got - pts) ** 2, axis=1)
    mismatches = int(np.sum(got_d2 > best + 1e-12))
    passed = worst <= ORACLE_TOL and mismatches == 0
    return CriterionResult(11, "closed-form oracles", bool(passed), {
        "levinson_max_abs_diff": worst,
        "d4_mismatches": mismatches,
        "d4_points": D4_ORACLE_POINTS,
    })


CRITERIA = (
    criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
    criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
    criterion_11,
)


def run_all(seed=DEFAULT_SEED):
    """Run every acceptance check; returns the list of records."""
    return [fn(seed) for fn in CRITERIA]
