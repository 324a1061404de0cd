"""Command-line front end.

Subcommands: simulate | equilibria | sensitivity | region | characteristics |
optimize | calibrate | avert. Every command reads defaults, then an optional
`key = value` config file, then command-line flags (flags win). Tabular
results go to CSV, reports to JSON; all floating-point output is printed with
17 significant digits so reruns are byte-identical.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, TextIO

import numpy as np

from . import analysis, calibration, control, equilibria
from .errors import IntegrationDivergedError, SeirvError
from .model import (
    IntegratorConfig,
    ModelParams,
    State,
    DEFAULT_PARAMS,
    integrate,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

MODEL_FIELDS = ("lam", "beta", "alpha", "eta1", "eta2", "sigma1", "sigma2", "mu", "c1", "c2")
STATE_FIELDS = ("s0", "e0", "i0", "r0", "v0")
DEFAULT_STATE = {"s0": 1e9, "e0": 0.0, "i0": 1.0, "r0": 0.0, "v0": 0.0}


def _fmt(x: float) -> str:
    """17-significant-digit decimal, enough to round-trip a double exactly."""
    return format(float(x), ".17g")


def _json_dump(obj, out: TextIO, indent: int = 0) -> None:
    """Minimal JSON writer with fixed float formatting (NaN becomes null)."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            out.write("{}")
            return
        out.write("{\n")
        for k, (key, val) in enumerate(obj.items()):
            out.write(f'{pad}  "{key}": ')
            _json_dump(val, out, indent + 1)
            out.write(",\n" if k < len(obj) - 1 else "\n")
        out.write(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            out.write("[]")
            return
        out.write("[\n")
        for k, val in enumerate(obj):
            out.write(pad + "  ")
            _json_dump(val, out, indent + 1)
            out.write(",\n" if k < len(obj) - 1 else "\n")
        out.write(pad + "]")
    elif isinstance(obj, bool):
        out.write("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.write(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        out.write("null" if math.isnan(x) else _fmt(x))
    elif obj is None:
        out.write("null")
    elif isinstance(obj, str):
        out.write('"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"')
    else:
        raise TypeError(f"cannot serialize {type(obj)!r}")


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _write_json(path: Optional[str], obj) -> None:
    out, close = _open_out(path)
    try:
        _json_dump(obj, out)
        out.write("\n")
    finally:
        if close:
            out.close()


def _write_csv(path: Optional[str], header: Sequence[str], rows) -> None:
    out, close = _open_out(path)
    try:
        out.write(",".join(header) + "\n")
        for row in rows:
            out.write(",".join(_fmt(x) if isinstance(x, (float, np.floating)) else str(x)
                               for x in row) + "\n")
    finally:
        if close:
            out.close()


@dataclass
class RunConfig:
    """Everything a command needs: parameters, initial state, run settings."""

    params: ModelParams
    init: State
    integrator: IntegratorConfig
    horizon: float
    seed: int


def _load_config_file(path: str) -> Dict[str, Dict[str, str]]:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError(f"cannot read config file {path!r}")
    return {section: dict(parser[section]) for section in parser.sections()}


def _build_run_config(args: argparse.Namespace, default_controls=(0.0, 0.0)) -> RunConfig:
    model_vals = {name: getattr(DEFAULT_PARAMS, name) for name in MODEL_FIELDS}
    model_vals["c1"], model_vals["c2"] = default_controls
    state_vals = dict(DEFAULT_STATE)
    dt = 0.01
    horizon = 2000.0
    seed = 0

    if getattr(args, "config", None):
        sections = _load_config_file(args.config)
        for key, val in sections.get("model", {}).items():
            if key not in MODEL_FIELDS:
                raise ValueError(f"unknown model config key {key!r}")
            model_vals[key] = float(val)
        for key, val in sections.get("init", {}).items():
            if key not in STATE_FIELDS:
                raise ValueError(f"unknown init config key {key!r}")
            state_vals[key] = float(val)
        integ = sections.get("integrator", {})
        if "dt" in integ:
            dt = float(integ["dt"])
        run = sections.get("run", {})
        if "horizon" in run:
            horizon = float(run["horizon"])
        if "seed" in run:
            seed = int(run["seed"])

    for name in MODEL_FIELDS:
        flag = getattr(args, name, None)
        if flag is not None:
            model_vals[name] = flag
    for name in STATE_FIELDS:
        flag = getattr(args, name, None)
        if flag is not None:
            state_vals[name] = flag
    if getattr(args, "dt", None) is not None:
        dt = args.dt
    if getattr(args, "horizon", None) is not None:
        horizon = args.horizon
    if getattr(args, "seed", None) is not None:
        seed = args.seed

    if horizon <= 0.0:
        raise ValueError(f"horizon must be > 0, got {horizon!r}")
    return RunConfig(
        params=ModelParams(**model_vals),
        init=State(state_vals["s0"], state_vals["e0"], state_vals["i0"],
                   state_vals["r0"], state_vals["v0"]),
        integrator=IntegratorConfig(dt=dt),
        horizon=horizon,
        seed=seed,
    )


def _add_shared_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="key = value config file (sections: model, init, integrator, run)")
    sp.add_argument("--seed", type=int, help="global RNG seed (default 0)")
    sp.add_argument("--out", help="output path (default: stdout)")
    sp.add_argument("--dt", type=float, help="integration step size (default 0.01)")
    sp.add_argument("--horizon", type=float, help="simulation horizon (default 2000)")
    for name in MODEL_FIELDS:
        flag = "--lambda" if name == "lam" else f"--{name}"
        sp.add_argument(flag, dest=name, type=float, help=f"model parameter {name}")
    for name in STATE_FIELDS:
        sp.add_argument(f"--{name}", type=float, help=f"initial {name[0].upper()} count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seirv",
        description="SEIRV malware-propagation model: simulation, analysis, control, calibration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="integrate the model and emit a trajectory CSV")
    _add_shared_flags(sp)

    sp = sub.add_parser("equilibria", help="equilibria, threshold and stability report (JSON)")
    _add_shared_flags(sp)

    sp = sub.add_parser("sensitivity", help="threshold elasticities per parameter (CSV)")
    _add_shared_flags(sp)
    sp.add_argument("--h-rel", type=float, default=1e-6, help="relative finite-difference step")

    sp = sub.add_parser("region", help="extinction/growth map over the control plane (CSV)")
    _add_shared_flags(sp)
    sp.add_argument("--resolution", type=int, default=101, help="grid points per axis")

    sp = sub.add_parser("characteristics", help="peak, peak time and total infections (JSON)")
    _add_shared_flags(sp)

    sp = sub.add_parser("optimize", help="hybrid gradient + annealing control search (JSON)")
    _add_shared_flags(sp)
    sp.add_argument("--m0", type=float, default=1.0, help="infection cost weight")
    sp.add_argument("--k1", type=float, default=0.2, help="vaccination cost weight")
    sp.add_argument("--k2", type=float, default=0.3, help="treatment cost weight")
    sp.add_argument("--start-c1", type=float, default=0.1, help="initial vaccination rate")
    sp.add_argument("--start-c2", type=float, default=0.1, help="initial treatment rate")
    sp.add_argument("--t0-temp", type=float, default=0.02, help="initial annealing temperature")
    sp.add_argument("--cooling", type=float, default=0.9, help="temperature decay factor")
    sp.add_argument("--n-cool", type=int, default=30, help="cooling steps per annealing phase")
    sp.add_argument("--n-perturb", type=int, default=20, help="perturbations per cooling step")
    sp.add_argument("--eps-k", type=float, default=1e-6, help="gradient-phase acceptance tolerance")
    sp.add_argument("--delta-k", type=float, default=1e-6, help="annealing acceptance tolerance")
    sp.add_argument("--step-eta", type=float, default=0.05, help="initial descent step size")
    sp.add_argument("--max-outer", type=int, default=20, help="outer-loop cap")
    sp.add_argument("--accept-rule", choices=("scaled", "classical"), default="scaled",
                    help="annealing acceptance probability form")

    sp = sub.add_parser("calibrate", help="fit piecewise beta to observed counts (JSON)")
    _add_shared_flags(sp)
    sp.add_argument("--data", required=True, help="input CSV with header time,count")
    sp.add_argument("--kind", choices=("cumulative", "daily"), default="cumulative",
                    help="how to interpret the count column")
    sp.add_argument("--segment-length", type=float, default=7.0,
                    help="length of each constant-beta segment")
    sp.add_argument("--nm-max-iter", type=int, default=2000, help="simplex iteration cap")
    sp.add_argument("--csv-out", help="also write an observed/fitted/residual CSV here")

    sp = sub.add_parser("avert", help="averted cases vs intervention onset (JSON)")
    _add_shared_flags(sp)
    sp.add_argument("--onset-grid", default="0,100,200,300,400,500",
                    help="comma-separated onset times")
    sp.add_argument("--csv-out", help="also write an onset/averted CSV here")

    return parser


def cmd_simulate(args: argparse.Namespace) -> int:
    rc = _build_run_config(args)
    traj = integrate(rc.params, rc.init, rc.horizon, rc.integrator)
    n = traj.n
    rows = (
        (traj.times[k], traj.s[k], traj.e[k], traj.i[k], traj.r[k], traj.v[k], n[k])
        for k in range(len(traj.times))
    )
    _write_csv(args.out, ["time", "S", "E", "I", "R", "V", "N"], rows)
    return EXIT_OK


def cmd_equilibria(args: argparse.Namespace) -> int:
    rc = _build_run_config(args)
    p = rc.params
    mfe = equilibria.compute_mfe(p)
    thr = equilibria.compute_rc(p, n0=rc.init.total)
    spectrum = equilibria.mfe_spectrum(p)
    endemic = equilibria.compute_endemic(p)
    report = {
        "mfe": {"s0": mfe.s0, "e0": mfe.e0, "i0": mfe.i0, "r0": mfe.r0, "v0": mfe.v0,
                "denominator_d": mfe.denominator_d},
        "threshold": {"rc": thr.rc, "rc_squared": thr.rc_squared, "n_tilde": thr.n_tilde},
        "mfe_spectrum": {
            "l1": spectrum.l1, "l2": spectrum.l2, "l3": spectrum.l3, "l4": spectrum.l4,
            "eigenvalues": list(spectrum.eigenvalues), "stable": spectrum.stable,
        },
        "endemic": None,
        "routh_hurwitz": None,
    }
    if endemic is not None:
        report["endemic"] = {"se": endemic.se, "ee": endemic.ee, "ie": endemic.ie,
                             "re": endemic.re, "ve": endemic.ve,
                             "a0": endemic.a0, "a1": endemic.a1}
        rh = equilibria.endemic_stability(p)
        report["routh_hurwitz"] = {
            "h1": rh.h1, "h2": rh.h2, "h3": rh.h3, "h4": rh.h4, "h5": rh.h5,
            "conditions": list(rh.conditions),
            "stable": rh.stable,
            "marginal": rh.marginal,
            "eigenvalues": [{"re": z.real, "im": z.imag} for z in rh.eigenvalues],
        }
    _write_json(args.out, report)
    return EXIT_OK


def cmd_sensitivity(args: argparse.Namespace) -> int:
    # Elasticities are undefined at zero, so this command defaults the
    # controls to 0.1, the reference operating point of the index table.
    rc = _build_run_config(args, default_controls=(0.1, 0.1))
    indices = analysis.sensitivity_indices(rc.params, h_rel=args.h_rel)
    _write_csv(args.out, ["parameter", "value"],
               ((ix.parameter, ix.value) for ix in indices))
    return EXIT_OK


def cmd_region(args: argparse.Namespace) -> int:
    rc = _build_run_config(args)
    rmap = analysis.region_map(rc.params, args.resolution)
    rows = []
    for i, c1 in enumerate(rmap.c1_grid):
        for j, c2 in enumerate(rmap.c2_grid):
            rows.append((c1, c2, "growth" if rmap.growth[i, j] else "extinction",
                         rmap.separatrix[i]))
    _write_csv(args.out, ["c1", "c2", "label", "separatrix_c2"], rows)
    return EXIT_OK


def cmd_characteristics(args: argparse.Namespace) -> int:
    rc = _build_run_config(args)
    traj = integrate(rc.params, rc.init, rc.horizon, rc.integrator)
    ch = analysis.characteristics(traj, rc.params)
    _write_json(args.out, {"i_max": ch.i_max, "t_m": ch.t_m, "i_tot": ch.i_tot})
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    rc = _build_run_config(args)
    cp = control.CostParams.for_run(rc.params, rc.init, m0=args.m0, k1=args.k1,
                                    k2=args.k2, horizon=rc.horizon)
    sa = control.SAConfig(
        t0=args.t0_temp, cooling=args.cooling, n_cool=args.n_cool,
        n_perturb=args.n_perturb, eps_k=args.eps_k, delta_k=args.delta_k,
        step_eta=args.step_eta, rng_seed=rc.seed, max_outer=args.max_outer,
        accept_rule=args.accept_rule,
    )
    run = control.hybrid_optimize(rc.params, cp, (args.start_c1, args.start_c2),
                                  sa, rc.init, rc.integrator)
    share1, share2 = control.effort_split(run.optimum)
    _write_json(args.out, {
        "optimum": {"c1": run.optimum[0], "c2": run.optimum[1]},
        "j_star": run.j_star,
        "effort_split": {"share1": share1, "share2": share2},
        "history": [{"c1": h[0], "c2": h[1], "j": h[2], "phase": t}
                    for h, t in zip(run.history, run.phase_tags)],
    })
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    rc = _build_run_config(args)
    series = calibration.load_series(args.data, kind=args.kind).as_cumulative()
    nm = calibration.NelderMeadConfig(max_iter=args.nm_max_iter)
    fit = calibration.fit_beta_segments(
        series, rc.params, segment_length=args.segment_length,
        init=rc.init, nm=nm, cfg=rc.integrator,
    )
    _write_json(args.out, {
        "beta_segments": {
            "breakpoints": list(fit.beta_segments.breakpoints),
            "values": list(fit.beta_segments.values),
        },
        "sse": fit.sse,
        "residuals": list(fit.residuals),
        "r_squared": fit.r_squared,
        "fitted": list(fit.fitted),
        "warnings": list(fit.warnings),
    })
    if args.csv_out:
        rows = zip(series.times, series.cumulative, fit.fitted, fit.residuals)
        _write_csv(args.csv_out, ["time", "observed", "fitted", "residual"], rows)
    return EXIT_OK


def cmd_avert(args: argparse.Namespace) -> int:
    rc = _build_run_config(args)
    onsets = [float(tok) for tok in args.onset_grid.split(",") if tok.strip()]
    curve = calibration.averted_cases(
        rc.params, (rc.params.c1, rc.params.c2), onsets, rc.init, rc.horizon,
        rc.integrator,
    )
    _write_json(args.out, {
        "onsets": list(curve.onsets),
        "averted": list(curve.averted),
        "decay_fit": {"amplitude": curve.decay_fit[0], "rate": curve.decay_fit[1]},
        "decay_r2": curve.decay_r2,
    })
    if args.csv_out:
        _write_csv(args.csv_out, ["onset", "averted"], zip(curve.onsets, curve.averted))
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "equilibria": cmd_equilibria,
    "sensitivity": cmd_sensitivity,
    "region": cmd_region,
    "characteristics": cmd_characteristics,
    "optimize": cmd_optimize,
    "calibrate": cmd_calibrate,
    "avert": cmd_avert,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except IntegrationDivergedError as exc:
        print(f"seirv {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (SeirvError, ValueError, OSError) as exc:
        print(f"seirv {args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
