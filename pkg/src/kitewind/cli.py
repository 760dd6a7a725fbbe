"""``kitewind`` command-line interface.

Exit codes: 0 success, 1 configuration or usage error, 2 simulation aborted
(validity guard), 3 robustness certificate infeasible.
"""
from __future__ import annotations

import argparse
import concurrent.futures as cf
import dataclasses
import io
import json
import math
import os
import sys

import numpy as np

from . import analysis, config as cfgio, robustness
from .errors import ConfigError, Infeasible, InsufficientData, KiteError, NotHurwitz
from .presets import WINGS, get_preset
from .simkit import Excitation, SimConfig, SimLog, atomic_write, run

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_INFEASIBLE = 0, 1, 2, 3

SWEEP_ALIASES = {
    "wgamma": "guidance.filter_cutoff_wgamma",
    "wind": "wind.nominal_speed",
    "Kc": "guidance.gain_Kc",
    "misalignment": "wind.misalignment",
    "seed": "wind.seed",
    "duration": "duration",
    "theta_target": "guidance.theta_target",
}


class UsageError(ConfigError):
    pass


def _floats(text: str, n: int | None = None, what: str = "value") -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"{what}: expected {n} comma-separated numbers, got {text!r}")
    return vals


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2) + "\n"
    if path:
        atomic_write(path, text)
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------------- config

def _add_sim_options(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file (SimConfig field names)")
    p.add_argument("--preset", choices=sorted(WINGS), help="wing preset (default airush9)")
    p.add_argument("--targets", help="theta,phi_minus,phi_plus in rad")
    p.add_argument("--wgamma", type=float, help="reference filter cutoff, Hz")
    p.add_argument("--wind", type=float, help="nominal wind speed, m/s")
    p.add_argument("--misalignment", type=float, help="wind misalignment, deg")
    p.add_argument("--duration", type=float, help="simulated time, s")
    p.add_argument("--seed", type=int, help="turbulence seed")
    p.add_argument("--Kc", type=float, help="velocity-angle gain, m/rad")
    p.add_argument("--turbulence", type=float, help="turbulence intensity, -")
    p.add_argument("--excitation", type=float, help="steering excitation amplitude, m")
    p.add_argument("--arithmetic", choices=("zenith", "shortest"), help="guidance angle arithmetic")


def build_config(args) -> SimConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config!r} ({exc.strerror})") from None
        base = cfgio.preset_config(args.preset) if args.preset else None
        cfg = cfgio.loads(text, base)
    else:
        cfg = cfgio.preset_config(args.preset or "airush9")
    g, w = cfg.guidance, cfg.wind
    try:
        if args.targets:
            th, pm, pp = _floats(args.targets, 3, "--targets")
            g = dataclasses.replace(g, target_minus=(pm, th), target_plus=(pp, th))
        if args.wgamma is not None:
            g = dataclasses.replace(g, filter_cutoff_wgamma=args.wgamma)
        if args.Kc is not None:
            g = dataclasses.replace(g, gain_Kc=args.Kc)
        if args.arithmetic:
            g = dataclasses.replace(g, angle_arithmetic=args.arithmetic)
        if args.wind is not None:
            w = dataclasses.replace(w, nominal_speed=args.wind)
        if args.misalignment is not None:
            w = dataclasses.replace(w, misalignment=math.radians(args.misalignment))
        if args.seed is not None:
            w = dataclasses.replace(w, seed=args.seed)
        if args.turbulence is not None:
            w = dataclasses.replace(w, turbulence_intensity=args.turbulence)
        cfg = dataclasses.replace(cfg, guidance=g, wind=w)
        if args.duration is not None:
            cfg = dataclasses.replace(cfg, duration=args.duration)
        if args.excitation is not None:
            cfg = dataclasses.replace(cfg, excitation=Excitation(args.excitation))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def set_axis(cfg: SimConfig, axis: str, value: float) -> SimConfig:
    path = SWEEP_ALIASES.get(axis, axis)
    try:
        if path == "guidance.theta_target":
            g = cfg.guidance
            g = dataclasses.replace(g, target_minus=(g.target_minus[0], value),
                                    target_plus=(g.target_plus[0], value))
            return dataclasses.replace(cfg, guidance=g)
        parts = path.split(".")
        if len(parts) == 1:
            if parts[0] not in {f.name for f in dataclasses.fields(cfg)} or parts[0] in cfgio._SECTIONS:
                raise UsageError(f"unknown sweep axis {axis!r}")
            return dataclasses.replace(cfg, **{parts[0]: value})
        if len(parts) == 2 and parts[0] in cfgio._SECTIONS:
            sec = getattr(cfg, parts[0])
            if parts[1] not in {f.name for f in dataclasses.fields(sec)}:
                raise UsageError(f"unknown sweep axis {axis!r}")
            if parts[1] == "seed":
                value = int(value)
            return dataclasses.replace(cfg, **{parts[0]: dataclasses.replace(sec, **{parts[1]: value})})
    except ValueError as exc:
        raise ConfigError(f"{axis}={value}: {exc}") from None
    raise UsageError(f"unknown sweep axis {axis!r}")


# ---------------------------------------------------------------- summaries

def run_summary(log: SimLog) -> dict:
    out = {
        "completed": log.completed,
        "abort": log.abort,
        "abort_message": log.abort_message,
        "abort_time": log.abort_time,
        "samples": len(log),
        "switches": log.switches,
        "flags": log.flags,
        "max_abs_delta_m_ref": float(np.max(np.abs(log["delta_m_ref"]))) if len(log) else 0.0,
    }
    try:
        out["metrics"] = analysis.path_metrics(log).to_dict()
    except InsufficientData:
        out["metrics"] = None
    return out


def _run_one(cfg: SimConfig) -> tuple[str, dict]:
    log = run(cfg)
    return log.to_csv(), run_summary(log)


# ---------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    cfg = build_config(args)
    log = run(cfg)
    summary = run_summary(log)
    if args.out:
        log.to_csv(args.out)
    if args.jsonl:
        log.to_jsonl(args.jsonl)
    _emit(summary, args.summary)
    if not log.completed:
        print(f"aborted: {log.abort} at t = {log.abort_time} s ({log.abort_message})", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def cmd_robustness(args) -> int:
    box = robustness.ParamBox()
    over = {}
    for name in ("speed", "Eeq", "CL", "area", "span", "mass"):
        v = getattr(args, name)
        if v is not None:
            lo, hi = _floats(v, 2, f"--{name}")
            over[name] = (lo, hi)
    try:
        box = dataclasses.replace(box, **over)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    act = get_preset(args.preset).actuator if args.preset else get_preset("airush9").actuator
    kc, kd, z, w = args.Kc, act.gear_Kdelta, act.cl_damping_zeta, act.cl_natural_freq
    k1, k2 = robustness.ktilde_bounds(box)
    report = {
        "ktilde_interval": [k1, k2],
        "hurwitz_limit": robustness.hurwitz_limit(kc, kd, z, w),
        "gains": {"Kc": kc, "Kdelta": kd, "zeta_cl": z, "w_cl": w},
    }
    try:
        cert = robustness.quadratic_stability(robustness.acl_matrix(k1, kc, kd, z, w),
                                              robustness.acl_matrix(k2, kc, kd, z, w))
    except NotHurwitz as exc:
        report.update(feasible=False, reason=f"not Hurwitz: {exc}")
        _emit(report, args.out)
        return EXIT_INFEASIBLE
    except Infeasible as exc:
        report.update(feasible=False, reason=str(exc), margin=exc.margin)
        _emit(report, args.out)
        return EXIT_INFEASIBLE
    report.update(feasible=True, margin=cert.margin, P=cert.P.tolist(),
                  vertex_max_eigs=list(cert.vertex_max_eigs), p_min_eig=cert.p_min_eig)
    _emit(report, args.out)
    return EXIT_OK


def _threads() -> int:
    env = os.environ.get("KITEWIND_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"KITEWIND_THREADS: expected an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("KITEWIND_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def cmd_sweep(args) -> int:
    values = _floats(args.values, what="--values")
    if not values:
        raise UsageError("--values: empty list")
    base = build_config(args)
    configs = [set_axis(base, args.axis, v) for v in values]
    workers = min(len(configs), _threads())
    if workers == 1:
        results = [_run_one(c) for c in configs]
    else:
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, configs))  # map keeps index order
    rows = []
    if args.outdir:
        os.makedirs(args.outdir, exist_ok=True)
    for k, (v, (csv_text, summary)) in enumerate(zip(values, results)):
        if args.outdir:
            atomic_write(os.path.join(args.outdir, f"run_{k:03d}.csv"), csv_text)
        m = summary["metrics"] or {}
        rows.append({
            "index": k, "axis": args.axis, "value": v, "completed": summary["completed"],
            "abort": summary["abort"], "n_eights": m.get("n_eights", 0),
            "path_area": m.get("path_area", float("nan")),
            "theta_min": (m.get("theta_envelope") or [float("nan")] * 2)[0],
            "theta_max": (m.get("theta_envelope") or [float("nan")] * 2)[1],
            "gamma_tracking_rms": m.get("gamma_tracking_rms", float("nan")),
            "mean_period": m.get("mean_period", float("nan")),
        })
    if args.outdir:
        buf = io.StringIO()
        keys = list(rows[0])
        buf.write(",".join(keys) + "\n")
        for r in rows:
            buf.write(",".join(str(r[k]) for k in keys) + "\n")
        atomic_write(os.path.join(args.outdir, "metrics.csv"), buf.getvalue())
    _emit(rows)
    return EXIT_OK if all(r["completed"] for r in rows) else EXIT_ABORT


def _load_log(path) -> SimLog:
    if not os.path.exists(path):
        raise ConfigError(f"--log: no such file {path!r}")
    return SimLog.from_csv(path)


def _wing_env(args):
    p = get_preset(args.preset or "airush9")
    return p.wing, p.env


def cmd_analyze(args) -> int:
    log = _load_log(args.log)
    wing, env = _wing_env(args)
    if args.analysis == "gain":
        rep = analysis.steering_gain_regression(log, wing, args.crosswind, env, args.compensate_bias).to_dict()
    elif args.analysis == "force":
        rep = analysis.force_regression(log, wing, env, args.efficiency_power).to_dict()
    elif args.analysis == "gammaxi":
        rms, mx = analysis.gamma_xi_comparison(log)
        rep = {"rms": rms, "max_abs": mx}
    else:
        rep = analysis.path_metrics(log).to_dict()
    _emit(rep, args.out)
    return EXIT_OK


def _write_series(arr, header, path):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in np.atleast_2d(arr):
        buf.write(",".join(f"{v:.9g}" for v in row) + "\n")
    if path:
        atomic_write(path, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def cmd_plotdata(args) -> int:
    log = _load_log(args.log)
    wing, env = _wing_env(args)
    kind = args.kind
    if kind == "path":
        _write_series(analysis.series_path(log), ["phi", "theta"], args.out)
    elif kind == "path3d":
        _write_series(analysis.series_path3d(log, env.tether_r), ["t", "x", "y", "z"], args.out)
    elif kind == "timeseries":
        if not args.column:
            raise UsageError("timeseries needs --column")
        try:
            arr = analysis.series_timeseries(log, args.column)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
        _write_series(arr, ["t", args.column], args.out)
    else:
        if kind == "gain":
            x, y = analysis.steering_gain_samples(log, wing, args.crosswind)
            rep = analysis.steering_gain_regression(log, wing, args.crosswind, env)
        else:
            x = analysis.force_regressor(wing, log["theta"], log["phi"], log["wind_speed"])
            y = np.asarray(log["tension_est"], float)
            rep = analysis.force_regression(log, wing, env)
        scatter, line = analysis.series_regression(x, y, rep)
        _write_series(scatter, ["x", "y"], args.out)
        if args.fit_out:
            _write_series(line, ["x", "y"], args.fit_out)
    return EXIT_OK


def cmd_config(args) -> int:
    text = cfgio.dumps(build_config(args))
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kitewind", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one closed-loop flight")
    _add_sim_options(p)
    p.add_argument("--out", help="CSV log path")
    p.add_argument("--jsonl", help="JSON-lines log path")
    p.add_argument("--summary", help="JSON summary path (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("robustness", help="quadratic stability over a parameter box")
    p.add_argument("--preset", choices=sorted(WINGS))
    p.add_argument("--Kc", type=float, default=0.046)
    for name in ("speed", "Eeq", "CL", "area", "span", "mass"):
        p.add_argument(f"--{name}", help="min,max")
    p.add_argument("--out")
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("sweep", help="parallel runs over one config axis")
    _add_sim_options(p)
    p.add_argument("--axis", required=True, help=f"dotted field path or one of {sorted(SWEEP_ALIASES)}")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--outdir", help="directory for per-run logs and metrics.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="analyse a CSV log")
    p.add_argument("analysis", choices=("gain", "force", "gammaxi", "path"))
    p.add_argument("--log", required=True)
    p.add_argument("--preset", choices=sorted(WINGS))
    p.add_argument("--crosswind", action="store_true", help="only |phi| <= 5 deg samples")
    p.add_argument("--compensate-bias", action="store_true")
    p.add_argument("--efficiency-power", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plotdata", help="export (x, y) series from a CSV log")
    p.add_argument("kind", choices=("path", "path3d", "timeseries", "gain", "force"))
    p.add_argument("--log", required=True)
    p.add_argument("--preset", choices=sorted(WINGS))
    p.add_argument("--column")
    p.add_argument("--crosswind", action="store_true")
    p.add_argument("--out")
    p.add_argument("--fit-out", help="CSV path for the fitted line end points")
    p.set_defaults(func=cmd_plotdata)

    p = sub.add_parser("config", help="print the resolved JSON config")
    _add_sim_options(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_config)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientData as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KiteError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
