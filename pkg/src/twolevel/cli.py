"""Command-line front end: ``twolevel {steady,spectrum,fano,simulate,compare,sweep}``."""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import (
    EstimateError,
    default_bin_width,
    estimate_fano,
    estimate_mean_photon,
    estimate_psd,
)
from .noise import (
    DarkLaserError,
    SpectrumKind,
    fano_closed_form,
    fano_quadrature,
    photocurrent_psd,
    psd_peak,
    spectrum_sweep,
)
from .sim import PumpMode, SimConfig, SimulationError, simulate
from .steady import (
    PARAM_KEYS,
    LaserParams,
    ParameterError,
    balance_residuals,
    params_from_dict,
    steady_state,
)

EXIT_OK, EXIT_INVALID, EXIT_GATE = 0, 2, 3
STANDARD_GAMMAS = (0.0, 6.32, 63.2, 632.0, 6325.0)
SIM_KEYS = ("duration", "burn_in", "sample_interval", "seed", "pump_mode", "record_detections", "stream")
Z_GATE = 5.0
SEGMENT_BINS = 2048


class UsageError(ValueError):
    pass


def fmt(x) -> str:
    return f"{x:.12g}"


def atomic_write(path: Path, text: str) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return str(path)


def csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) if isinstance(v, float) else str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = (
        _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc)
        if epoch
        else _dt.datetime.now(_dt.timezone.utc)
    )
    return now.isoformat(timespec="seconds")


# -- argument handling -------------------------------------------------------


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    unknown = set(cfg) - set(PARAM_KEYS) - set(SIM_KEYS)
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def resolve_params(args) -> LaserParams:
    cfg = _load_config(args.config)
    d = {k: cfg[k] for k in PARAM_KEYS if k in cfg}
    for k in PARAM_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            d[k] = v
    if "N" in d and isinstance(d["N"], float) and d["N"].is_integer():
        d["N"] = int(d["N"])
    return params_from_dict(d)


def resolve_sim_config(args, params: LaserParams) -> SimConfig:
    cfg = _load_config(args.config)
    d = {k: cfg[k] for k in SIM_KEYS if k in cfg}
    for k in ("duration", "burn_in", "sample_interval", "seed", "stream"):
        v = getattr(args, k, None)
        if v is not None:
            d[k] = v
    if args.no_detections:
        d["record_detections"] = False
    mode = PumpMode.for_xi(params.xi)
    if "pump_mode" in d and PumpMode(d["pump_mode"]) is not mode:
        raise SimulationError(f"pump_mode {d['pump_mode']} does not realize xi={params.xi}")
    d["pump_mode"] = mode
    if "duration" not in d:
        raise UsageError("--duration is required for simulation")
    d.setdefault("burn_in", min(0.01 * d["duration"], 100.0))
    if "sample_interval" not in d:
        d["sample_interval"] = (d["duration"] - d["burn_in"]) / 1e5 if params.J <= 0 else min(
            0.01, 0.05 / max(params.alpha, steady_state(params).m_hat), (d["duration"] - d["burn_in"]) / 100
        )
        d["sample_interval"] = max(d["sample_interval"], 1e-6)
    d["seed"] = int(d.get("seed", 0))
    d["stream"] = int(d.get("stream", 0))
    return SimConfig(**d)


def _add_params(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("laser parameters")
    g.add_argument("--config", help="JSON file with parameter (and simulation) keys")
    g.add_argument("--N", type=float, help="number of active atoms")
    g.add_argument("--alpha", type=float, help="photon loss/detection rate")
    g.add_argument("--gamma", type=float, help="spontaneous decay rate")
    g.add_argument("--J", type=float, help="mean pump rate")
    g.add_argument("--xi", type=float, help="pump noise parameter, 0 (quiet) to 1 (Poissonian)")
    p.add_argument("--out-dir", type=Path, help="write outputs and a manifest here")


def _add_sim(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("simulation")
    g.add_argument("--duration", type=float)
    g.add_argument("--burn-in", dest="burn_in", type=float)
    g.add_argument("--sample-interval", dest="sample_interval", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--stream", type=int)
    g.add_argument("--no-detections", action="store_true")
    g.add_argument("--bin-width", dest="bin_width", type=float, help="spectrum bin width")
    g.add_argument("--segment-bins", dest="segment_bins", type=int, default=SEGMENT_BINS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twolevel", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("steady", help="steady-state photon number and populations")
    _add_params(p)

    p = sub.add_parser("spectrum", help="photocurrent (or intracavity) spectral density")
    _add_params(p)
    p.add_argument("--omega-min", type=float, default=1e-2)
    p.add_argument("--omega-max", type=float, default=1e4)
    p.add_argument("--points", type=int, default=121)
    p.add_argument("--linear", action="store_true", help="linear instead of log grid")
    p.add_argument("--intracavity", action="store_true")
    p.add_argument("--peak", action="store_true", help="also report the spectral maximum")

    p = sub.add_parser("fano", help="intracavity Fano factor")
    _add_params(p)

    p = sub.add_parser("simulate", help="jump-process simulation")
    _add_params(p)
    _add_sim(p)
    p.add_argument("--estimate", action="store_true", help="append statistical estimates")

    p = sub.add_parser("compare", help="simulation vs analytic cross-validation")
    _add_params(p)
    _add_sim(p)

    p = sub.add_parser("sweep", help="pump sweep of m, F and spectral peak")
    _add_params(p)
    p.add_argument("--J-min", dest="J_min", type=float, default=1e-1)
    p.add_argument("--J-max", dest="J_max", type=float, default=1e6)
    p.add_argument("--J-points", dest="J_points", type=int, default=71)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gamma-set", choices=["standard"], help="the five decay rates 0 ... 6325")
    g.add_argument("--gamma-list", type=str, help="comma-separated decay rates")
    return parser


# -- commands ----------------------------------------------------------------


class Run:
    """Collects written files and renders the manifest."""

    def __init__(self, args, params: LaserParams, config: SimConfig | None = None, grid=None):
        self.args = args
        self.params = params
        self.config = config
        self.grid = grid
        self.outputs: list[str] = []

    def write(self, name: str, text: str) -> None:
        self.outputs.append(atomic_write(self.args.out_dir / name, text))

    def finish(self) -> None:
        if self.args.out_dir is None:
            return
        manifest = {
            "command": self.args.command,
            "params": self.params.to_dict(),
            "config": self.config.to_dict() if self.config else None,
            "grid": self.grid,
            "outputs": self.outputs,
            "version": __version__,
            "timestamp": _timestamp(),
        }
        atomic_write(self.args.out_dir / "manifest.json", dumps(manifest))


def steady_report(params: LaserParams) -> dict:
    ss = steady_state(params)
    pump_res, photon_res = balance_residuals(params, ss)
    return {
        "m": ss.m,
        "n2": ss.n2,
        "n0": ss.n0,
        "J_hat": ss.J_hat,
        "m_hat": ss.m_hat,
        "residuals": {"pump": pump_res, "photon": photon_res},
    }


def fano_report(params: LaserParams) -> dict:
    closed = fano_closed_form(params)
    quad = fano_quadrature(params)
    return {
        "m": steady_state(params).m,
        "fano_closed_form": closed,
        "fano_quadrature": quad,
        "relative_difference": abs(closed - quad) / abs(closed),
    }


def cmd_steady(args, out) -> int:
    params = resolve_params(args)
    report = steady_report(params)
    run = Run(args, params)
    text = dumps(report)
    if args.out_dir:
        run.write("steady.json", text)
    run.finish()
    out.write(text)
    return EXIT_OK


def cmd_spectrum(args, out) -> int:
    params = resolve_params(args)
    if params.J <= 0:
        raise DarkLaserError("spectrum undefined for dark laser (J = 0)")
    if args.points < 1:
        raise UsageError("--points must be ≥ 1")
    if args.linear:
        grid = np.linspace(args.omega_min, args.omega_max, args.points)
    else:
        if args.omega_min <= 0:
            raise UsageError("log grid needs --omega-min > 0")
        grid = np.geomspace(args.omega_min, args.omega_max, args.points)
    kind = SpectrumKind.Intracavity if args.intracavity else SpectrumKind.Photocurrent
    series = spectrum_sweep(params, grid, kind)
    text = csv_text(["omega", "value"], series.points)
    grid_spec = {
        "omega_min": args.omega_min, "omega_max": args.omega_max, "points": args.points,
        "spacing": "linear" if args.linear else "log", "kind": kind.value,
    }
    run = Run(args, params, grid=grid_spec)
    peak = None
    if args.peak:
        w, s = psd_peak(params)
        peak = {"omega_star": w, "s_max": s}
    if args.out_dir:
        run.write("spectrum.csv", text)
        if peak:
            run.write("peak.json", dumps(peak))
            out.write(dumps(peak))
    else:
        out.write(text)
        if peak:
            sys.stderr.write(dumps(peak))
    run.finish()
    return EXIT_OK


def cmd_fano(args, out) -> int:
    params = resolve_params(args)
    report = fano_report(params)
    run = Run(args, params)
    text = dumps(report)
    if args.out_dir:
        run.write("fano.json", text)
    run.finish()
    out.write(text)
    return EXIT_OK


def _psd_setup(args, params: LaserParams, config: SimConfig) -> tuple[float, int]:
    bw = args.bin_width or default_bin_width(params)
    n_bins = int(math.floor((config.duration - config.burn_in) / bw))
    return bw, max(1, n_bins // max(args.segment_bins, 64))


def estimates(args, params: LaserParams, config: SimConfig, traj):
    report = {"mean_photon": estimate_mean_photon(traj).to_dict(), "fano": estimate_fano(traj).to_dict()}
    psd = None
    if config.record_detections and traj.detections.size:
        bw, nseg = _psd_setup(args, params, config)
        psd = estimate_psd(traj.detections, config.duration, bw, nseg, start=config.burn_in)
        report["psd"] = {"bin_width": psd.bin_width, "n_segments": psd.n_segments, "n_points": len(psd)}
    return report, psd


def cmd_simulate(args, out) -> int:
    params = resolve_params(args)
    if args.out_dir is None:
        raise UsageError("simulate needs --out-dir")
    config = resolve_sim_config(args, params)
    traj = simulate(params, config)
    run = Run(args, params, config)
    d = args.out_dir
    run.outputs += traj.write(
        d / "samples.csv",
        d / "detections.csv" if config.record_detections else None,
        d / "trajectory.json",
    )
    report = {"event_counts": traj.event_counts, "blocked_pump": traj.blocked_pump}
    if args.estimate:
        est, psd = estimates(args, params, config, traj)
        report.update(est)
        if psd is not None:
            run.write("psd.csv", csv_text(["omega", "value", "std_error"], psd.points))
    text = dumps(report)
    run.write("report.json", text)
    run.finish()
    out.write(text)
    return EXIT_OK


def compare_rows(args, params: LaserParams, config: SimConfig, traj) -> list[dict]:
    ss = steady_state(params)
    rows = []

    def row(quantity, analytic, est, omega=None):
        z = est.z_score(analytic) if hasattr(est, "z_score") else None
        r = {"quantity": quantity, "analytic": analytic, "estimated": est.value,
             "std_error": est.std_error, "z": z}
        if omega is not None:
            r["omega"] = omega
        rows.append(r)

    row("mean_photon", ss.m, estimate_mean_photon(traj))
    row("fano", fano_closed_form(params), estimate_fano(traj))
    if config.record_detections and traj.detections.size:
        bw, nseg = _psd_setup(args, params, config)
        psd = estimate_psd(traj.detections, config.duration, bw, nseg, start=config.burn_in)
        analytic = photocurrent_psd(params, psd.omega)
        for w, a, v, se in zip(psd.omega, analytic, psd.value, psd.std_error):
            rows.append({"quantity": "psd", "omega": float(w), "analytic": float(a),
                         "estimated": float(v), "std_error": float(se),
                         "z": float((v - a) / se) if se > 0 else 0.0})
    return rows


def cmd_compare(args, out) -> int:
    params = resolve_params(args)
    if params.J <= 0:
        raise DarkLaserError("comparison undefined for dark laser (J = 0)")
    config = resolve_sim_config(args, params)
    traj = simulate(params, config)
    rows = compare_rows(args, params, config, traj)
    worst = max(abs(r["z"]) for r in rows)
    header = ["quantity", "omega", "analytic", "estimated", "std_error", "z"]
    text = csv_text(header, ([r["quantity"], float(r.get("omega", float("nan"))), r["analytic"],
                              r["estimated"], r["std_error"], float(r["z"])] for r in rows))
    run = Run(args, params, config)
    summary = {"max_abs_z": worst, "gate": Z_GATE, "passed": worst <= Z_GATE,
               "rows": [r for r in rows if r["quantity"] != "psd"]}
    if args.out_dir:
        run.write("compare.csv", text)
        run.write("compare.json", dumps(summary))
        out.write(dumps(summary))
    else:
        out.write(text)
    run.finish()
    return EXIT_OK if worst <= Z_GATE else EXIT_GATE


def _gammas(args, params: LaserParams) -> list[float]:
    if args.gamma_set == "standard":
        return list(STANDARD_GAMMAS)
    if args.gamma_list:
        return [float(g) for g in args.gamma_list.split(",") if g.strip()]
    return [params.gamma]


def sweep_rows(template: LaserParams, J_values, gammas) -> list[list[float]]:
    rows = []
    for gamma in gammas:
        for J in J_values:
            p = template.replace(J=float(J), gamma=float(gamma))
            params_from_dict(p.to_dict())
            ss = steady_state(p)
            if J > 0:
                F = fano_closed_form(p)
                w, s = psd_peak(p)
            else:
                F = w = s = float("nan")
            rows.append([float(J), float(gamma), ss.m, F, s, w])
    return rows


def cmd_sweep(args, out) -> int:
    cfg = _load_config(args.config)
    d = {k: cfg[k] for k in PARAM_KEYS if k in cfg}
    for k in PARAM_KEYS:
        if getattr(args, k) is not None:
            d[k] = getattr(args, k)
    d.setdefault("gamma", 0.0)
    d.setdefault("J", 1.0)
    template = params_from_dict(d)
    if args.J_points < 1 or args.J_min <= 0 or args.J_max < args.J_min:
        raise UsageError("empty sweep: need --J-points ≥ 1 and 0 < --J-min ≤ --J-max")
    J_values = np.geomspace(args.J_min, args.J_max, args.J_points)
    gammas = _gammas(args, template)
    if not gammas:
        raise UsageError("empty sweep: no gamma values")
    rows = sweep_rows(template, J_values, gammas)
    text = csv_text(["J", "gamma", "m", "F", "S_max", "omega_star"], rows)
    grid = {"J_min": args.J_min, "J_max": args.J_max, "J_points": args.J_points, "gammas": gammas}
    run = Run(args, template, grid=grid)
    if args.out_dir:
        run.write("sweep.csv", text)
    else:
        out.write(text)
    run.finish()
    return EXIT_OK


COMMANDS = {
    "steady": cmd_steady,
    "spectrum": cmd_spectrum,
    "fano": cmd_fano,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args, out)
    except (ParameterError, DarkLaserError, SimulationError, EstimateError, UsageError) as exc:
        print(f"twolevel {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
