"""Experiment specifications, run manifests, and run orchestration.

Configs are strict JSON: unknown keys are rejected with the offending path,
and a spec round-trips through its serialized form bit-exactly (floats are
emitted with shortest round-trip representation).
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import SolverSettings, Trajectory, evolve
from .experiments import DataFamily, classify
from .fields import CartesianGrid, RadialGrid, save_snapshot
from .functionals import PotentialSpec
from .groundstate import certified_ground_state

__all__ = ["ExperimentSpec", "RunManifest", "ConfigError", "parse_config",
           "run", "report", "write_diagnostics_csv"]


class ConfigError(ValueError):
    pass


_GRID_KEYS = {"radial": {"kind", "r_max", "n"}, "cartesian": {"kind", "l", "m"}}
_FAMILY_KINDS = ("scaled_groundstate", "translated_groundstate", "gaussian",
                 "custom_profile")
_SOLVER_DEFAULTS = {
    "dt0": 1e-3, "dt_min": 1e-8, "cfl_like_cap": 0.25, "t_end": 10.0,
    "sponge_on": False, "sponge_width": None, "sponge_strength": 5.0,
    "record_every": 20, "blowup_gradfactor": 4.0, "adapt_on": True,
    "adapt_gain": 1e-8, "nonlinearity_on": True, "order": 2,
    "absorb_done": 2.0, "record_l5": True,
}
_DIAG_DEFAULTS = {"weight_radii": (), "snapshot_every": None}


def _require_keys(section: dict, allowed: set, path: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {path}")


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    potential: PotentialSpec
    grid_kind: str
    grid_params: tuple
    family: DataFamily
    solver: SolverSettings
    weight_radii: tuple[float, ...]
    snapshot_every: float | None
    output_dir: str
    seed: int = 0

    def make_grid(self):
        if self.grid_kind == "radial":
            return RadialGrid(r_max=self.grid_params[0], n=int(self.grid_params[1]))
        return CartesianGrid(l=self.grid_params[0], m=int(self.grid_params[1]))

    def to_dict(self) -> dict:
        sv = {k: getattr(self.solver, k) for k in _SOLVER_DEFAULTS}
        if self.grid_kind == "radial":
            grid = {"kind": "radial", "r_max": self.grid_params[0],
                    "n": int(self.grid_params[1])}
        else:
            grid = {"kind": "cartesian", "l": self.grid_params[0],
                    "m": int(self.grid_params[1])}
        return {
            "name": self.name,
            "potential": {"a": self.potential.a, "mu": self.potential.mu},
            "grid": grid,
            "family": {"kind": self.family.kind,
                       "parameters": dict(self.family.parameters)},
            "solver": sv,
            "diagnostics": {"weight_radii": list(self.weight_radii),
                            "snapshot_every": self.snapshot_every},
            "output_dir": self.output_dir,
            "seed": self.seed,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def spec_from_dict(data: dict) -> ExperimentSpec:
    _require_keys(data, {"name", "potential", "grid", "family", "solver",
                         "diagnostics", "output_dir", "seed"}, "<root>")
    for key in ("name", "potential", "grid", "family", "output_dir"):
        if key not in data:
            raise ConfigError(f"missing required key {key!r}")

    pot_sec = data["potential"]
    _require_keys(pot_sec, {"a", "mu"}, "potential")
    try:
        pot = PotentialSpec(float(pot_sec.get("a", 0.0)),
                            float(pot_sec.get("mu", 1.5)))
    except ValueError as exc:
        raise ConfigError(f"potential: {exc}") from exc

    grid_sec = data["grid"]
    kind = grid_sec.get("kind")
    if kind not in _GRID_KEYS:
        raise ConfigError(f"grid.kind must be 'radial' or 'cartesian', got {kind!r}")
    _require_keys(grid_sec, _GRID_KEYS[kind], "grid")
    if kind == "radial":
        params = (float(grid_sec.get("r_max", 30.0)), int(grid_sec.get("n", 4096)))
    else:
        params = (float(grid_sec.get("l", 16.0)), int(grid_sec.get("m", 96)))

    fam_sec = data["family"]
    _require_keys(fam_sec, {"kind", "parameters"}, "family")
    if fam_sec.get("kind") not in _FAMILY_KINDS:
        raise ConfigError(f"family.kind {fam_sec.get('kind')!r} not one of "
                          f"{_FAMILY_KINDS}")
    family = DataFamily(fam_sec["kind"], dict(fam_sec.get("parameters", {})), pot)

    solver_sec = dict(data.get("solver", {}))
    _require_keys(solver_sec, set(_SOLVER_DEFAULTS), "solver")
    solver_kwargs = {**_SOLVER_DEFAULTS, **solver_sec}

    diag_sec = dict(data.get("diagnostics", {}))
    _require_keys(diag_sec, set(_DIAG_DEFAULTS), "diagnostics")
    weight_radii = tuple(
        math.inf if (isinstance(r, str) and r == "inf") or r == math.inf
        else float(r)
        for r in diag_sec.get("weight_radii", ()))
    snapshot_every = diag_sec.get("snapshot_every")

    solver = SolverSettings(
        weight_radii=weight_radii,
        snapshot_every=snapshot_every,
        **{k: (tuple(v) if isinstance(v, list) else v)
           for k, v in solver_kwargs.items()},
    )
    return ExperimentSpec(
        name=str(data["name"]), potential=pot, grid_kind=kind,
        grid_params=params, family=family, solver=solver,
        weight_radii=weight_radii, snapshot_every=snapshot_every,
        output_dir=str(data["output_dir"]), seed=int(data.get("seed", 0)),
    )


def parse_config(path) -> ExperimentSpec:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return spec_from_dict(data)


# ---------------------------------------------------------------------------
# CSV / manifest output
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_diagnostics_csv(path, traj: Trajectory) -> None:
    """Fixed schema: t, mass, energy, pv, delta, grad_sq, l4, pot_term,
    i_r_<R>..., f_r_<R>..., variance, flux, int_abs5, sup_norm, dt, status."""
    radii = list(traj.settings.weight_radii)
    header = (["t", "mass", "energy", "pv", "delta", "grad_sq", "l4", "pot_term"]
              + [f"i_r_{r:g}" for r in radii] + [f"f_r_{r:g}" for r in radii]
              + ["variance", "flux", "int_abs5", "sup_norm", "dt", "status"])
    lines = [",".join(header)]
    for rec in traj.records:
        row = [rec.t, rec.mass, rec.energy, rec.pv, rec.delta, rec.grad_sq,
               rec.l4, rec.pot_term]
        row += [rec.i_r[r] for r in radii]
        row += [rec.f_r[r] for r in radii]
        row += [rec.variance, rec.flux, rec.int_abs5, rec.sup_norm, rec.dt,
                traj.status]
        lines.append(",".join(_fmt(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class RunManifest:
    spec_hash: str
    tool_version: str
    started_at: float
    finished_at: float
    status: str
    outputs: list

    def write(self, path) -> None:
        path = Path(path)
        if path.exists():
            raise ConfigError(f"manifest already exists (append-only): {path}")
        path.write_text(json.dumps(asdict(self), sort_keys=True, indent=1),
                        encoding="utf-8")


def run(spec: ExperimentSpec) -> RunManifest:
    """Execute one evolve-type run and persist spec, diagnostics, snapshots,
    verdict, and the manifest under spec.output_dir."""
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    gs = certified_ground_state()
    grid = spec.make_grid()
    u0 = spec.family.build(grid, gs)
    traj = evolve(u0, spec.potential, spec.solver, gs)

    outputs = []
    spec_path = out / "spec.json"
    spec_path.write_text(spec.canonical_json(), encoding="utf-8")
    outputs.append(str(spec_path))

    csv_path = out / "diagnostics.csv"
    write_diagnostics_csv(csv_path, traj)
    outputs.append(str(csv_path))

    for t_snap, f_snap in traj.snapshots:
        snap_path = out / f"snapshot_t{t_snap:.6f}.nlsf"
        save_snapshot(snap_path, f_snap, time=t_snap)
        outputs.append(str(snap_path))

    verdict = classify(traj)
    verdict_path = out / "verdict.json"
    verdict_path.write_text(
        json.dumps({"outcome": verdict.outcome, "evidence": verdict.evidence},
                   sort_keys=True, indent=1, default=str), encoding="utf-8")
    outputs.append(str(verdict_path))

    manifest = RunManifest(
        spec_hash=spec.sha256(), tool_version=__version__,
        started_at=started, finished_at=time.time(),
        status=traj.status, outputs=outputs,
    )
    manifest.write(out / "manifest.json")
    return manifest


def report(root) -> dict:
    """Aggregate manifests and verdicts below a directory."""
    root = Path(root)
    runs = []
    for mpath in sorted(root.rglob("manifest.json")):
        entry = json.loads(mpath.read_text(encoding="utf-8"))
        entry["path"] = str(mpath.parent)
        vpath = mpath.parent / "verdict.json"
        if vpath.exists():
            entry["verdict"] = json.loads(vpath.read_text(encoding="utf-8"))
        runs.append(entry)
    ok = all(r.get("status") in ("completed", "blowup_detected",
                                 "sponge_absorbed") for r in runs)
    return {"runs": runs, "count": len(runs), "all_runs_healthy": ok}
