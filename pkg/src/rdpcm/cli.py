"""Command-line experiment runner.

Every subcommand reads a JSON config, runs one pipeline, and writes a
JSON report (plus CSV tables for anything plottable) into the output
directory.  Reports embed the fully resolved config and seed and carry
a schema_version; they contain no timestamps, so rerunning with the
same seed reproduces them byte for byte.  Validation failures print a
machine-readable error object and exit nonzero.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .acceptance import run_all
from .dfe import (
    ChannelModel,
    backward_spectrum_check,
    dfe_simulate,
    error_entropy_power,
    slicer_snr_theory,
)
from .ecdq import cubic_lattice, d4_lattice, scalar_lattice, vq_dpcm_run
from .errors import DomainError, RdpcmError
from .spectra import (
    DEFAULT_GRID_SIZE,
    ar_spectrum,
    entropy_power,
    grid_frequencies,
    ma_spectrum,
    psd_grid,
    tabulated_spectrum,
    variance,
    white_spectrum,
)
from .testchannel import SimConfig, run_predictive_channel
from .waterfill import (
    half_whitened_spectrum,
    nats_to_bits,
    prediction_gains,
    rdf,
    slb,
)

SCHEMA_VERSION = 1

TRACE_COLUMNS = ("X", "U", "Z", "Zq", "V", "Y")


def parse_spectrum(obj, grid_size=None):
    """Build a PowerSpectrum from its JSON description."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise DomainError("source must be an object with a 'kind' field")
    kind = obj["kind"]
    g = grid_size or obj.get("grid_size") or DEFAULT_GRID_SIZE
    if kind == "white":
        return white_spectrum(obj["sigma2"], grid_size=g)
    if kind == "ar":
        return ar_spectrum(tuple(obj["a"]), obj["sigma_w2"], grid_size=g)
    if kind == "ma":
        return ma_spectrum(tuple(obj["taps"]), grid_size=g)
    if kind == "tabulated":
        return tabulated_spectrum(np.asarray(obj["values"], dtype=float))
    raise DomainError(
        f"unknown spectrum kind {kind!r} "
        "(expected white, ar, ma, or tabulated)"
    )


def spectrum_config(spec):
    """JSON form of a spectrum, for report embedding."""
    out = {"kind": spec.kind, "grid_size": spec.grid_size}
    if spec.kind == "ar":
        out["a"] = list(spec.a)
        out["sigma_w2"] = spec.sigma_w2
    elif spec.kind == "ma":
        out["taps"] = list(spec.taps)
    else:
        out["values"] = [float(v) for v in psd_grid(spec)]
    return out


def _require_seed(args, cfg):
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise DomainError(
            "a seed is required: pass --seed or put \"seed\" in the config"
        )
    return int(seed)


def _write_json(out_dir, name, payload):
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    path = out_dir / name
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=2, allow_nan=False)
        + "\n"
    )
    return path


def _write_csv(out_dir, name, header, rows):
    path = out_dir / name
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
    return path


def _overlay_rows(spec, solution):
    f = grid_frequencies(spec.grid_size)
    s = psd_grid(spec)
    d_of_f = solution.distortion_spectrum
    for i in range(f.size):
        yield f[i], s[i], d_of_f[i], solution.theta


def cmd_rdf_curve(args, cfg, out_dir):
    spec = parse_spectrum(cfg["source"], args.grid_size)
    d_lo = float(cfg["d_min"])
    d_hi = float(cfg["d_max"])
    points = int(cfg.get("points", 50))
    spacing = cfg.get("spacing", "log")
    if spacing == "log":
        grid = np.geomspace(d_lo, d_hi, points)
    elif spacing == "linear":
        grid = np.linspace(d_lo, d_hi, points)
    else:
        raise DomainError(f"spacing must be 'log' or 'linear', not {spacing!r}")
    sols = [rdf(spec, d) for d in grid]
    curve = _write_csv(
        out_dir, "rdf_curve.csv",
        ("D", "theta", "rate_bits", "slb_bits", "slb_tight"),
        ((d, s.theta, s.rate_bits, nats_to_bits(slb(spec, d)),
          float(s.slb_tight))
         for d, s in zip(grid, sols)),
    )
    overlay_d = float(cfg.get("overlay_D", grid[points // 2]))
    overlay_sol = rdf(spec, overlay_d)
    overlay = _write_csv(
        out_dir, "waterfill_overlay.csv",
        ("f", "S", "D_of_f", "theta"),
        _overlay_rows(spec, overlay_sol),
    )
    report = _write_json(out_dir, "rdf_curve.json", {
        "command": "rdf-curve",
        "config": {
            "source": spectrum_config(spec),
            "d_min": d_lo, "d_max": d_hi,
            "points": points, "spacing": spacing,
            "overlay_D": overlay_d,
            "seed": None,
        },
        "deterministic": True,
        "summary": {
            "rate_bits_first": sols[0].rate_bits,
            "rate_bits_last": sols[-1].rate_bits,
            "variance": variance(spec),
        },
        "outputs": {"curve_csv": curve.name, "overlay_csv": overlay.name},
    })
    return [report, curve, overlay], 0


def _sim_config(args, cfg, seed):
    spec = parse_spectrum(cfg["source"], args.grid_size)
    return SimConfig(
        source=spec,
        D=float(cfg["D"]),
        seed=seed,
        L=int(args.predictor_order or cfg.get("L", 64)),
        T=int(args.fir_taps or cfg.get("T", 257)),
        N=int(args.samples or cfg.get("N", 1_000_000)),
        burn_in=cfg.get("burn_in"),
        keep_traces=bool(cfg.get("keep_traces", False)),
    )


def _sim_config_json(sim):
    return {
        "source": spectrum_config(sim.source),
        "D": sim.D, "L": sim.L, "T": sim.T, "N": sim.N,
        "burn_in": sim.resolved_burn_in(),
        "keep_traces": sim.keep_traces,
        "seed": sim.seed,
    }


def cmd_simulate(args, cfg, out_dir):
    sim = _sim_config(args, cfg, _require_seed(args, cfg))
    sim.validate()
    res = run_predictive_channel(sim)
    files = []
    if sim.keep_traces:
        files.append(_write_csv(
            out_dir, "traces.csv", ("n",) + TRACE_COLUMNS,
            ((i, *(res.traces[c][i] for c in TRACE_COLUMNS))
             for i in range(sim.N)),
        ))
    report = _write_json(out_dir, "simulate.json", {
        "command": "simulate",
        "config": _sim_config_json(sim),
        "results": {
            "measured_D": res.measured_d,
            "var_Z": res.var_z,
            "var_Zq": res.var_zq,
            "mi_scalar_bits": res.mi_scalar_bits,
            "rate_theory_bits": res.rate_theory_bits,
            "theta": res.theta,
            "zq_autocorr": [float(v) for v in res.zq_autocorr],
            "valid_start": res.valid_start,
            "valid_stop": res.valid_stop,
        },
    })
    return [report] + files, 0


def _build_lattice(args, cfg):
    name = args.lattice or cfg.get("lattice", "scalar")
    delta = args.delta if args.delta is not None else cfg.get("delta")
    if name == "scalar":
        return scalar_lattice(delta or 1.0), delta is not None
    if name == "zK":
        dim = int(cfg.get("lattice_dim", args.interleave or 2))
        return cubic_lattice(dim, delta or 1.0), delta is not None
    if name == "d4":
        return d4_lattice(delta or 1.0), delta is not None
    raise DomainError(
        f"unknown lattice {name!r} (expected scalar, zK, or d4)"
    )


def cmd_ecdq(args, cfg, out_dir):
    seed = _require_seed(args, cfg)
    sim = _sim_config(args, cfg, seed)
    sim.validate()
    lattice, fixed_scale = _build_lattice(args, cfg)
    depth = int(args.interleave or cfg.get("interleave", 1))
    context = int(
        args.context_order
        if args.context_order is not None
        else cfg.get("context_order", 2)
    )
    out = vq_dpcm_run(
        sim, lattice,
        interleave_depth=depth,
        context_order=context,
        bins_per_dim=cfg.get("bins_per_dim"),
        scale_to_target=not fixed_scale,
    )
    per_source = [{
        "measured_D": r.measured_d,
        "var_Z": r.var_z,
        "var_Zq": r.var_zq,
        "mi_scalar_bits": r.mi_scalar_bits,
        "rate_theory_bits": r.rate_theory_bits,
    } for r in out.per_source]
    report = _write_json(out_dir, "ecdq.json", {
        "command": "ecdq",
        "config": {
            **_sim_config_json(sim),
            "lattice": lattice.rule,
            "lattice_dim": lattice.dimension,
            "interleave": depth,
            "context_order": context,
            "delta": args.delta if args.delta is not None
                     else cfg.get("delta"),
        },
        "results": {
            "rate_bits_per_sample": out.rate.bits,
            "rate_reliable": out.rate.reliable,
            "occupied_cells": out.rate.occupied_cells,
            "noise_var": out.noise_var,
            "theta": out.theta,
            "lattice_scale": out.lattice.scale,
            "per_source": per_source,
        },
    })
    return [report], 0


def cmd_dfe(args, cfg, out_dir):
    seed = _require_seed(args, cfg)
    channel = ChannelModel(
        isi_taps=tuple(float(t) for t in cfg["isi_taps"]),
        noise_spec=parse_spectrum(cfg["noise"], args.grid_size),
        power=float(cfg["power"]),
    )
    n = int(args.samples or cfg.get("N", 1_000_000))
    order = int(args.predictor_order or cfg.get("L", 64))
    taps = int(args.fir_taps or cfg.get("T", 257))
    sol = dfe_simulate(channel, n, seed, order, fir_taps=taps)
    s_x = np.maximum(sol.theta - sol.equivalent_noise, 0.0)
    report = _write_json(out_dir, "dfe.json", {
        "command": "dfe",
        "config": {
            "isi_taps": list(channel.isi_taps),
            "noise": spectrum_config(channel.noise_spec),
            "power": channel.power,
            "N": n, "L": order, "T": taps,
            "seed": seed,
        },
        "results": {
            "capacity_bits": sol.capacity_bits,
            "capacity_nats": sol.capacity_nats,
            "theta": sol.theta,
            "sigma_u2": sol.sigma_u2,
            "sigma_e2": sol.sigma_e2,
            "mi_scalar_bits": sol.mi_scalar_bits,
            "slicer_snr_theory": slicer_snr_theory(
                s_x, sol.equivalent_noise
            ),
            "slicer_snr_measured": sol.sigma_u2 / sol.sigma_e2,
            "error_entropy_power": error_entropy_power(sol),
            "x_power": sol.x_power,
            "backward_spectrum_max_dev": backward_spectrum_check(sol),
        },
    })
    return [report], 0


def cmd_gains(args, cfg, out_dir):
    spec = parse_spectrum(cfg["source"], args.grid_size)
    closed, open_loop, ratio = prediction_gains(spec)
    half = half_whitened_spectrum(spec)
    ratio_alt = (variance(half) / entropy_power(half)) ** 2
    report = _write_json(out_dir, "gains.json", {
        "command": "gains",
        "config": {"source": spectrum_config(spec), "seed": None},
        "deterministic": True,
        "results": {
            "closed_loop_gain": closed,
            "open_loop_gain": open_loop,
            "ratio": ratio,
            "ratio_alt_route": ratio_alt,
        },
    })
    return [report], 0


def _strip_timings(details):
    return {k: v for k, v in details.items() if not k.endswith("elapsed_s")}


def cmd_verify_all(args, cfg, out_dir):
    seed = _require_seed(args, cfg)
    results = run_all(seed)
    all_passed = all(r.passed for r in results)
    report = _write_json(out_dir, "verify_all.json", {
        "command": "verify-all",
        "config": {"seed": seed},
        "all_passed": all_passed,
        "criteria": [{
            "number": r.number,
            "name": r.name,
            "passed": r.passed,
            "details": _strip_timings(r.details),
        } for r in results],
    })
    for r in results:
        print(f"criterion {r.number:2d} ({r.name}): "
              f"{'PASS' if r.passed else 'FAIL'}")
    return [report], 0 if all_passed else 1


COMMANDS = {
    "rdf-curve": cmd_rdf_curve,
    "simulate": cmd_simulate,
    "ecdq": cmd_ecdq,
    "dfe": cmd_dfe,
    "gains": cmd_gains,
    "verify-all": cmd_verify_all,
}

NEEDS_CONFIG = {"rdf-curve", "simulate", "ecdq", "dfe", "gains"}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rdpcm",
        description="Rate-distortion prediction experiments",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path,
                        help="JSON config file for the command")
    parser.add_argument("--seed", type=int,
                        help="seed for every random draw in the run")
    parser.add_argument("--out", type=Path, default=Path("."),
                        help="directory for reports and CSV tables")
    parser.add_argument("--fir-taps", type=int, dest="fir_taps")
    parser.add_argument("--predictor-order", type=int,
                        dest="predictor_order")
    parser.add_argument("--samples", type=int)
    parser.add_argument("--grid-size", type=int, dest="grid_size")
    parser.add_argument("--lattice", choices=["scalar", "zK", "d4"])
    parser.add_argument("--delta", type=float)
    parser.add_argument("--context-order", type=int, dest="context_order")
    parser.add_argument("--interleave", type=int)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = {}
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(json.dumps({
                "error": type(exc).__name__,
                "message": f"cannot read config: {exc}",
            }))
            return 1
    elif args.command in NEEDS_CONFIG:
        print(json.dumps({
            "error": "MissingConfig",
            "message": f"{args.command} requires --config",
        }))
        return 1
    out_dir = args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        files, status = COMMANDS[args.command](args, cfg, out_dir)
    except RdpcmError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        interval = getattr(exc, "valid_interval", None)
        if interval is not None:
            payload["valid_interval"] = [float(v) for v in interval]
        print(json.dumps(payload))
        return 1
    except (KeyError, TypeError, ValueError) as exc:
        print(json.dumps({
            "error": type(exc).__name__,
            "message": f"invalid config: {exc}",
        }))
        return 1
    for path in files:
        print(path)
    return status


if __name__ == "__main__":
    sys.exit(main())
