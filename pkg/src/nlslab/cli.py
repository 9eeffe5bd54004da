"""Command-line interface.

Subcommands: groundstate, verify, evolve, modulate, sweep, l5growth, report.
Exit codes: 0 success, 1 acceptance/verification failure, 2 configuration
error.  NLSLAB_WORKERS caps the FFT worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, parse_config, report, run, spec_from_dict
from .fields import load_snapshot, save_snapshot
from .functionals import PotentialSpec, delta
from .groundstate import certified_ground_state, solve_ground_state_shooting

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def cmd_groundstate(args) -> int:
    gs = solve_ground_state_shooting(tol=args.tol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    constants = gs.constants_dict()
    (out / "groundstate.json").write_text(
        json.dumps(constants, indent=1, sort_keys=True), encoding="utf-8")
    from .fields import RadialGrid

    save_snapshot(out / "ground_state_profile.nlsf", gs.field(RadialGrid()))
    print(json.dumps(constants, indent=1, sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import run_all

    result = run_all()
    text = json.dumps(result, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    for suite, checks in result["suites"].items():
        for c in checks:
            tag = "PASS" if c["passed"] else "FAIL"
            print(f"[{tag}] {suite}.{c['name']}: observed {c['observed']:.3e} "
                  f"(tolerance {c['tolerance']:.1e})")
    print("verification:", "PASS" if result["passed"] else "FAIL")
    return EXIT_OK if result["passed"] else EXIT_FAIL


def _spec_from_args(args):
    if args.config:
        return parse_config(args.config)
    data = {
        "name": args.name,
        "potential": {"a": args.a, "mu": args.mu},
        "grid": ({"kind": "radial", "r_max": args.r_max, "n": args.n}
                 if args.grid == "radial"
                 else {"kind": "cartesian", "l": args.box, "m": args.m}),
        "family": {"kind": args.family,
                   "parameters": json.loads(args.family_params)},
        "solver": {"dt0": args.dt0, "t_end": args.t_end,
                   "record_every": args.record_every,
                   "sponge_on": args.sponge, "adapt_gain": args.adapt_gain},
        "diagnostics": {"weight_radii": args.weight_radii,
                        "snapshot_every": args.snapshot_every},
        "output_dir": args.out,
        "seed": args.seed,
    }
    return spec_from_dict(data)


def cmd_evolve(args) -> int:
    spec = _spec_from_args(args)
    manifest = run(spec)
    print(f"run {spec.name}: status={manifest.status}")
    for p in manifest.outputs:
        print(" ", p)
    return EXIT_OK


def cmd_modulate(args) -> int:
    from .modulation import fit_modulation, modulation_track

    gs = certified_ground_state()
    src = Path(args.input)
    snaps = []
    if src.is_dir():
        for p in sorted(src.glob("snapshot_t*.nlsf")):
            f, t = load_snapshot(p)
            snaps.append((t, f))
    else:
        f, t = load_snapshot(src)
        snaps.append((t, f))
    if not snaps:
        print("no snapshots found", file=sys.stderr)
        return EXIT_CONFIG
    pot = PotentialSpec(args.a, args.mu) if args.a > 0 else PotentialSpec.free()
    fits = modulation_track(snaps, gs, delta0=args.delta0, pot=pot)
    lines = ["t,theta,y1,y2,y3,alpha,g_h1,h_h1,delta,res_g2q"]
    by_time = {t: f for t, f in snaps}
    for fit in fits:
        dlt = delta(by_time[fit.t], pot, gs)
        lines.append(",".join(repr(float(x)) for x in (
            fit.t, fit.theta, *fit.y, fit.alpha, fit.g_h1, fit.h_h1, dlt,
            fit.residuals["g2_q"])))
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"fitted {len(fits)} of {len(snaps)} snapshots -> {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    gs = certified_ground_state()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pot = PotentialSpec(args.a, args.mu)
    if args.study == "dichotomy":
        from .config import ExperimentSpec, run as run_spec
        from .experiments import DataFamily

        results = {}
        for branch in ("sub", "super"):
            data = {
                "name": f"dichotomy_{branch}",
                "potential": {"a": args.a, "mu": args.mu},
                "grid": {"kind": "radial", "r_max": 30.0, "n": 4096},
                "family": {"kind": "scaled_groundstate",
                           "parameters": {"branch": branch}},
                "solver": {"dt0": 5e-3 if branch == "sub" else 2e-4,
                           "t_end": 20.0 if branch == "sub" else 10.0,
                           "record_every": 5, "adapt_gain": 1e-5,
                           "sponge_on": branch == "sub"},
                "diagnostics": {"weight_radii": [], "snapshot_every": None},
                "output_dir": str(out / branch),
                "seed": args.seed,
            }
            manifest = run_spec(spec_from_dict(data))
            verdict = json.loads(
                (out / branch / "verdict.json").read_text(encoding="utf-8"))
            results[branch] = verdict["outcome"]
            print(f"{branch}: {verdict['outcome']} ({manifest.status})")
        ok = results.get("sub") == "Scattering" and results.get("super") == "BlowUp"
        (out / "summary.json").write_text(
            json.dumps({"study": "dichotomy", "outcomes": results,
                        "passed": ok}, indent=1), encoding="utf-8")
        return EXIT_OK if ok else EXIT_FAIL

    if args.study == "action":
        from .experiments import zero_virial_action_sweep

        rows = zero_virial_action_sweep(gs, pot, [0.0, 3.0, 6.0, 9.0])
        s0 = 2.0 * gs.e0
        lines = ["y,amplitude,action,potential_weight,valid"]
        for r in rows:
            lines.append(",".join(repr(float(r[k])) if not isinstance(r[k], bool)
                                  else str(r[k])
                                  for k in ("y", "amplitude", "action",
                                            "potential_weight", "valid")))
        (out / "action_sweep.csv").write_text("\n".join(lines) + "\n",
                                              encoding="utf-8")
        acts = [r["action"] for r in rows if r["valid"]]
        ok = all(a >= s0 - 1e-6 for a in acts) and all(
            acts[i] > acts[i + 1] for i in range(len(acts) - 1))
        (out / "summary.json").write_text(
            json.dumps({"study": "action", "s0": s0, "actions": acts,
                        "passed": ok}, indent=1), encoding="utf-8")
        print(f"action sweep: {'PASS' if ok else 'FAIL'} (S0 = {s0:.6f})")
        return EXIT_OK if ok else EXIT_FAIL

    print(f"unknown study {args.study!r}", file=sys.stderr)
    return EXIT_CONFIG


def cmd_l5growth(args) -> int:
    from .experiments import run_threshold_growth_study

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pot = PotentialSpec(args.a, args.mu)
    n_list = list(range(args.count))
    eps = [2.0 ** (-n) for n in n_list]
    centers = [(4.0 + n, 0.0, 0.0) for n in n_list]
    rows = run_threshold_growth_study(eps, centers, pot, args.T)
    lines = ["n,eps,center_norm,mass_energy_gap,pv,l5_window,time_near_soliton,status"]
    for r in rows:
        lines.append(",".join(str(r.get(k)) for k in (
            "n", "eps", "center_norm", "mass_energy_gap", "pv", "l5_window",
            "time_near_soliton", "status")))
    (out / "l5_growth.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    l5 = [r.get("l5_window", math.nan) for r in rows]
    dur = [r.get("time_near_soliton", math.nan) for r in rows]
    increasing = all(l5[i] < l5[i + 1] for i in range(len(l5) - 1)) and \
        all(dur[i] < dur[i + 1] for i in range(len(dur) - 1))
    (out / "summary.json").write_text(
        json.dumps({"study": "l5growth", "l5": l5, "near_soliton": dur,
                    "strictly_increasing": increasing}, indent=1),
        encoding="utf-8")
    print(f"l5 growth: {'PASS' if increasing else 'FAIL'}")
    print(" l5      :", l5)
    print(" duration:", dur)
    return EXIT_OK if increasing else EXIT_FAIL


def cmd_report(args) -> int:
    summary = report(args.dir)
    text = json.dumps(summary, indent=1, sort_keys=True, default=str)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text)
    return EXIT_OK if summary["all_runs_healthy"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlslab",
        description="Pseudospectral laboratory for the focusing cubic NLS "
                    "with a repulsive inverse-power potential",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("groundstate", help="solve and certify the ground state")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", default="runs/groundstate")
    p.set_defaults(func=cmd_groundstate)

    p = sub.add_parser("verify", help="run the identity/inequality suites")
    p.add_argument("--out", default=None, help="write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("evolve", help="run one time-evolution experiment")
    p.add_argument("--config", default=None, help="JSON experiment spec")
    p.add_argument("--name", default="run")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.5)
    p.add_argument("--grid", choices=("radial", "cartesian"), default="radial")
    p.add_argument("--r-max", type=float, default=30.0)
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--box", type=float, default=16.0)
    p.add_argument("--m", type=int, default=96)
    p.add_argument("--family", default="scaled_groundstate")
    p.add_argument("--family-params", default='{"branch": "sub"}')
    p.add_argument("--dt0", type=float, default=1e-3)
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--record-every", type=int, default=20)
    p.add_argument("--sponge", action="store_true")
    p.add_argument("--adapt-gain", type=float, default=1e-8)
    p.add_argument("--weight-radii", type=float, nargs="*", default=[])
    p.add_argument("--snapshot-every", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/evolve")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("modulate", help="fit the soliton decomposition")
    p.add_argument("--input", required=True,
                   help="snapshot file or run directory")
    p.add_argument("--out", default="modulation.csv")
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--mu", type=float, default=1.5)
    p.add_argument("--delta0", type=float, default=5.67)
    p.set_defaults(func=cmd_modulate)

    p = sub.add_parser("sweep", help="threshold dichotomy or action study")
    p.add_argument("--study", choices=("dichotomy", "action"),
                   default="dichotomy")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("l5growth", help="threshold space-time-norm growth study")
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--T", type=float, default=20.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.5)
    p.add_argument("--out", default="runs/l5growth")
    p.set_defaults(func=cmd_l5growth)

    p = sub.add_parser("report", help="aggregate manifests under a directory")
    p.add_argument("--dir", default="runs")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
