"""Time evolution by Strang splitting, with conservation monitoring,
adaptive stepping, blow-up detection, and an absorbing sponge layer.

One step advances

    u <- exp(i (dt/2) (|u|^2 - V)) u        (exact pointwise phase)
    u <- exp(i dt Lap) u                    (exact spectral propagator)
    u <- exp(i (dt/2) (|u|^2 - V)) u

so mass is preserved to round-off (every substep is an L^2 isometry).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .fields import CartesianGrid, ComplexField, RadialGrid
from .functionals import (
    PotentialSpec,
    VirialWeight,
    effective_potential_nodes,
    localized_virial,
    localized_virial_rate,
    potential_term,
    variance,
    variance_flux,
)
from .groundstate import GroundState, certified_ground_state

__all__ = [
    "SolverSettings",
    "DiagnosticsRecord",
    "Trajectory",
    "strang_step",
    "evolve",
    "virial_identity_check",
    "variance_convexity_check",
    "STATUS_COMPLETED",
    "STATUS_BLOWUP",
    "STATUS_UNDERRESOLVED",
    "STATUS_SPONGE",
]

STATUS_COMPLETED = "completed"
STATUS_BLOWUP = "blowup_detected"
STATUS_UNDERRESOLVED = "underresolved"
STATUS_SPONGE = "sponge_absorbed"


def fft_workers() -> int:
    return max(1, int(os.environ.get("NLSLAB_WORKERS", "1")))


class ConfigurationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverSettings:
    dt0: float = 1e-3
    dt_min: float = 1e-8
    cfl_like_cap: float = 0.25        # max nonlinear phase advance per step
    t_end: float = 10.0
    sponge_on: bool = False
    sponge_width: float | None = None  # absorbing layer depth; default 20% of domain
    sponge_strength: float = 5.0
    record_every: int = 20
    blowup_gradfactor: float = 4.0
    adapt_on: bool = True
    adapt_gain: float = 1e-8          # per-step energy jump threshold, relative
    nonlinearity_on: bool = True
    order: int = 2                    # Strang (2) or triple-jump composition (4)
    weight_radii: tuple[float, ...] = ()
    snapshot_every: float | None = None
    keep_snapshots: bool = True
    absorb_done: float = 2.0          # absorbed-mass fraction that ends a run; >1 disables
    record_l5: bool = True

    def __post_init__(self):
        if self.dt_min <= 0 or self.dt0 < self.dt_min:
            raise ConfigurationError("need dt0 >= dt_min > 0")
        if self.blowup_gradfactor <= 1.0:
            raise ConfigurationError("blowup_gradfactor must exceed 1")
        if self.record_every < 1:
            raise ConfigurationError("record_every must be >= 1")
        if self.order not in (2, 4):
            raise ConfigurationError("order must be 2 or 4")

    def sponge_depth(self, domain_radius: float) -> float:
        width = 0.2 * domain_radius if self.sponge_width is None else self.sponge_width
        if not (0.0 < width < 0.5 * domain_radius):
            raise ConfigurationError("sponge width must lie in (0, domain_radius/2)")
        return width


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    pv: float
    delta: float
    grad_sq: float
    l4: float
    pot_term: float
    i_r: dict
    f_r: dict
    variance: float
    flux: float
    int_abs5: float
    sup_norm: float
    dt: float


@dataclass
class Trajectory:
    grid: RadialGrid | CartesianGrid
    pot: PotentialSpec
    settings: SolverSettings
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)   # (t, ComplexField)
    status: str = STATUS_COMPLETED
    t_final: float = 0.0
    u_final: ComplexField | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records])

    def weight_column(self, kind: str, radius: float) -> np.ndarray:
        attr = "i_r" if kind == "i" else "f_r"
        return np.array([getattr(rec, attr)[radius] for rec in self.records])


# ---------------------------------------------------------------------------
# propagator
# ---------------------------------------------------------------------------

_eig_cache: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _radial_h_eig(grid: RadialGrid, pot: PotentialSpec):
    """One-time dense eigendecomposition of H_v = -d^2/dr^2 + V(r) on the
    Dirichlet line (v = r*u).  Cached per (grid, potential)."""
    key = (grid.r_max, grid.n, pot.a, pot.mu)
    hit = _eig_cache.get(key)
    if hit is not None:
        return hit
    from scipy.linalg import eigh

    n = grid.n
    j = np.arange(1, n)
    basis = np.sqrt(2.0 / n) * np.sin(np.pi * np.outer(j, j) / n)
    h = (basis * grid.laplacian_eigenvalues) @ basis.T
    h[np.diag_indices_from(h)] += effective_potential_nodes(grid, pot.a, pot.mu)
    omega, modes = eigh(h, overwrite_a=True)
    _eig_cache[key] = (omega, modes)
    return omega, modes


class _Propagator:
    """Caches the static node data and per-dt multipliers for one (grid, pot).

    Three regimes:

    * radial, a = 0: exact sine-spectral free propagator (diagonal).
    * radial, a > 0: the potential joins the linear operator H = -Lap + V,
      whose exact unitary flow is applied through the cached eigenbasis of
      H_v = -d^2/dr^2 + V, so the splitting error involves only the smooth
      nonlinearity.  Putting V into the pointwise phase instead is
      catastrophically inaccurate here: dt*V at the innermost node is O(1),
      and the phase wiggle it imprints leaks O(1) energy into the gradient
      norm within a few hundred steps.
    * Cartesian: FFT propagator with V in the pointwise phase.  The offset
      grid keeps V <= a (dx sqrt(3)/2)^(-mu), so dt*V stays small.
    """

    def __init__(self, grid, pot: PotentialSpec, nonlinearity: bool = True,
                 sponge: tuple[float, float] | None = None):
        self.grid = grid
        self.pot = pot
        self.nonlinearity = nonlinearity
        if isinstance(grid, RadialGrid):
            self.radius = grid.r
            self.lam = grid.laplacian_eigenvalues
        else:
            self.radius = grid.radius()
            self.lam = grid.k_sq()
        self.V = effective_potential_nodes(grid, pot.a, pot.mu) if pot.a > 0 else None
        self.exact_h = isinstance(grid, RadialGrid) and pot.a > 0
        if self.exact_h:
            self.omega, self.modes = _radial_h_eig(grid, pot)
        self._lin: dict[float, np.ndarray] = {}
        self._damp: dict[float, np.ndarray] = {}
        self.sigma = None
        if sponge is not None:
            width, strength = sponge
            r_dom = grid.r_max if isinstance(grid, RadialGrid) else grid.l
            r0 = r_dom - width
            ramp = np.clip((self.radius - r0) / width, 0.0, 1.0)
            self.sigma = strength * ramp**2 * (3.0 - 2.0 * ramp)

    def _linear_multiplier(self, dt: float) -> np.ndarray:
        mult = self._lin.get(dt)
        if mult is None:
            mult = np.exp(-1j * dt * (self.omega if self.exact_h else self.lam))
            self._lin[dt] = mult
        return mult

    def _damping(self, dt: float):
        if self.sigma is None:
            return None
        damp = self._damp.get(dt)
        if damp is None:
            damp = np.exp(-dt * self.sigma)
            self._damp[dt] = damp
        return damp

    def _phase(self, vals: np.ndarray, half_dt: float) -> np.ndarray:
        """Pointwise phase substep: |u|^2, plus -V unless V lives in H."""
        arg = None
        if self.nonlinearity:
            arg = np.abs(vals) ** 2
        if self.V is not None and not self.exact_h:
            arg = -self.V if arg is None else arg - self.V
        if arg is None:
            return vals
        return vals * np.exp(1j * half_dt * arg)

    def step(self, vals: np.ndarray, dt: float) -> np.ndarray:
        vals = self._phase(vals, 0.5 * dt)
        if isinstance(self.grid, RadialGrid):
            v = self.grid.r * vals
            if self.exact_h:
                # real eigenbasis applied to re/im as one (n-1) x 2 block
                block = np.column_stack([v.real, v.imag])
                coeff = self.modes.T @ block
                spinning = self._linear_multiplier(dt) * (coeff[:, 0] + 1j * coeff[:, 1])
                out = self.modes @ np.column_stack([spinning.real, spinning.imag])
                v = out[:, 0] + 1j * out[:, 1]
            else:
                v = sfft.idst(self._linear_multiplier(dt) * sfft.dst(v, type=1), type=1)
            vals = v / self.grid.r
        else:
            w = fft_workers()
            modes = sfft.fftn(vals, workers=w)
            modes *= self._linear_multiplier(dt)
            vals = sfft.ifftn(modes, workers=w)
        vals = self._phase(vals, 0.5 * dt)
        damp = self._damping(dt)
        if damp is not None:
            vals = vals * damp
        return vals

    def mass_raw(self, vals: np.ndarray) -> float:
        return 0.5 * self.grid.quad(np.abs(vals) ** 2)


def strang_step(u: ComplexField, dt: float, pot: PotentialSpec,
                nonlinearity: bool = True) -> ComplexField:
    """One Strang step; mass-preserving by construction."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    pot.require_dynamics()
    prop = _Propagator(u.grid, pot, nonlinearity=nonlinearity)
    out = prop.step(u.values, dt)
    return ComplexField(u.grid, out)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def compute_record(f: ComplexField, pot: PotentialSpec, gs: GroundState,
                   weights: tuple[VirialWeight, ...], t: float, dt: float,
                   record_l5: bool = True, nonlinear: bool = True) -> DiagnosticsRecord:
    from .fields import gradient_norm_sq

    abs2 = np.abs(f.values) ** 2
    grad = gradient_norm_sq(f)
    pterm = potential_term(f, pot)
    l4 = f.grid.quad(abs2 * abs2)
    i_r = {w.R: localized_virial(f, w) for w in weights}
    f_r = {w.R: localized_virial_rate(f, w, pot) for w in weights}
    if not nonlinear:
        # linear flow: the |u|^4 term is absent from dI_R/dt
        radius = f.grid.r if isinstance(f.grid, RadialGrid) else f.grid.radius()
        for w in weights:
            f_r[w.R] += f.grid.quad(w.lap_w(radius) * abs2 * abs2)
    return DiagnosticsRecord(
        t=t,
        mass=0.5 * f.grid.quad(abs2),
        energy=0.5 * grad + 0.5 * pterm - 0.25 * l4,
        pv=2.0 * grad + pot.mu * pterm - 1.5 * l4,
        delta=gs.grad_sq - grad - pterm,
        grad_sq=grad,
        l4=l4,
        pot_term=pterm,
        i_r=i_r,
        f_r=f_r,
        variance=variance(f),
        flux=variance_flux(f),
        int_abs5=f.grid.quad(np.abs(f.values) ** 5) if record_l5 else math.nan,
        sup_norm=float(np.max(np.abs(f.values))),
        dt=dt,
    )


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------

def evolve(u0: ComplexField, pot: PotentialSpec, settings: SolverSettings,
           gs: GroundState | None = None, record_callback=None) -> Trajectory:
    """Advance u0 to t_end (or until blow-up / absorption / breakdown).

    Adaptive control: the step is rejected and dt halved when the per-step
    energy jump exceeds adapt_gain * |E(0)| (while conservation monitors are
    active), or when the nonlinear phase advance exceeds cfl_like_cap; after
    100 clean steps dt doubles back toward dt0.  Reaching dt_min counts as
    blow-up (temporal resolution exhausted), as does crossing the gradient
    threshold blowup_gradfactor^2 ||grad Q||^2 with monotone growth over the
    last 10 records.
    """
    pot.require_dynamics()
    u0.require_finite()
    gs = gs or certified_ground_state()
    grid = u0.grid

    sponge = None
    if settings.sponge_on:
        r_dom = grid.r_max if isinstance(grid, RadialGrid) else grid.l
        sponge = (settings.sponge_depth(r_dom), settings.sponge_strength)
    prop = _Propagator(grid, pot, nonlinearity=settings.nonlinearity_on, sponge=sponge)
    weights = tuple(VirialWeight(R) for R in settings.weight_radii)

    traj = Trajectory(grid=grid, pot=pot, settings=settings)

    def emit(vals: np.ndarray, t: float, dt: float) -> DiagnosticsRecord:
        f = ComplexField(grid, vals)
        rec = compute_record(f, pot, gs, weights, t, dt, settings.record_l5,
                             nonlinear=settings.nonlinearity_on)
        traj.records.append(rec)
        if record_callback is not None:
            record_callback(t, f)
        return rec

    vals = u0.values.copy()
    t = 0.0
    dt = settings.dt0
    mass0 = prop.mass_raw(vals)
    rec0 = emit(vals, 0.0, dt)
    e_ref = max(abs(rec0.energy), 1e-6 * max(mass0, 1.0))
    e_prev = rec0.energy
    monitors_on = True
    grad_limit = settings.blowup_gradfactor**2 * gs.grad_sq

    next_snap = 0.0
    if settings.snapshot_every is not None and settings.keep_snapshots:
        traj.snapshots.append((0.0, ComplexField(grid, vals)))
        next_snap = settings.snapshot_every

    step_index = 0
    clean_steps = 0
    eps = 1e-12 * settings.t_end
    w1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))  # 4th-order triple-jump weights
    w0 = 1.0 - 2.0 * w1

    def advance(v: np.ndarray, step_dt: float) -> np.ndarray:
        if settings.order == 2:
            return prop.step(v, step_dt)
        v = prop.step(v, w1 * step_dt)
        v = prop.step(v, w0 * step_dt)
        return prop.step(v, w1 * step_dt)

    def full_energy(v: np.ndarray) -> float:
        f = ComplexField(grid, v)
        from .fields import gradient_norm_sq

        return (0.5 * gradient_norm_sq(f) + 0.5 * potential_term(f, pot)
                - 0.25 * grid.quad(np.abs(v) ** 4))

    while t < settings.t_end - eps:
        # nonlinear phase cap
        if settings.adapt_on and settings.nonlinearity_on:
            peak = float(np.max(np.abs(vals))) ** 2
            while peak * dt > settings.cfl_like_cap and dt > settings.dt_min:
                dt = max(0.5 * dt, settings.dt_min)
        dt_eff = min(dt, settings.t_end - t)
        new_vals = advance(vals, dt_eff)

        if not np.isfinite(new_vals).all():
            if step_index == 0:
                raise ConfigurationError("non-finite state after the first step")
            traj.status = STATUS_UNDERRESOLVED
            break

        if settings.adapt_on and monitors_on:
            e_new = full_energy(new_vals)
            if abs(e_new - e_prev) > settings.adapt_gain * e_ref and dt_eff > settings.dt_min:
                dt = max(0.5 * dt_eff, settings.dt_min)
                clean_steps = 0
                if dt <= settings.dt_min:
                    traj.status = STATUS_BLOWUP
                    break
                continue  # reject the step
            e_prev = e_new

        vals = new_vals
        t += dt_eff
        step_index += 1
        clean_steps += 1
        if clean_steps >= 100 and 2.0 * dt <= settings.dt0:
            dt *= 2.0
            clean_steps = 0

        at_end = t >= settings.t_end - eps
        if step_index % settings.record_every == 0 or at_end:
            rec = emit(vals, t, dt_eff)

            absorbed = 1.0 - rec.mass / mass0 if mass0 > 0 else 0.0
            if monitors_on and absorbed > 1e-6:
                monitors_on = False
            if settings.sponge_on and absorbed >= settings.absorb_done:
                traj.status = STATUS_SPONGE
                break

            if settings.snapshot_every is not None and settings.keep_snapshots \
                    and t >= next_snap - eps:
                traj.snapshots.append((t, ComplexField(grid, vals)))
                next_snap += settings.snapshot_every

            grads = traj.column("grad_sq")
            if rec.grad_sq >= grad_limit and len(grads) >= 10 \
                    and bool(np.all(np.diff(grads[-10:]) > 0)):
                traj.status = STATUS_BLOWUP
                break

    traj.t_final = t
    traj.u_final = ComplexField(grid, vals)
    return traj


# ---------------------------------------------------------------------------
# trajectory-level checks
# ---------------------------------------------------------------------------

def virial_identity_check(traj: Trajectory, R: float) -> float:
    """Max over interior records of |dI_R/dt - F_{R,V}| / (1 + |F_{R,V}|).

    dI_R/dt by a three-point difference that handles nonuniform spacing.
    """
    if len(traj.records) < 3:
        raise ValueError("need at least 3 records")
    t = traj.column("t")
    i_vals = traj.weight_column("i", R)
    f_vals = traj.weight_column("f", R)
    worst = 0.0
    for k in range(1, len(t) - 1):
        dl = t[k] - t[k - 1]
        dr = t[k + 1] - t[k]
        slope_l = (i_vals[k] - i_vals[k - 1]) / dl
        slope_r = (i_vals[k + 1] - i_vals[k]) / dr
        didt = (slope_l * dr + slope_r * dl) / (dl + dr)
        worst = max(worst, abs(didt - f_vals[k]) / (1.0 + abs(f_vals[k])))
    return worst


def variance_convexity_check(traj: Trajectory, side: str | None = None) -> dict:
    """Sign structure of the variance along a trajectory.

    Blow-up side: variance curvature 4 P_V < 0 at every record, the variance
    slope eventually decreasing, and delta < 0 throughout.  Scattering side:
    delta > 0 throughout.
    """
    if side is None:
        side = "blowup" if traj.records[0].delta < 0 else "scattering"
    pv = traj.column("pv")
    dlt = traj.column("delta")
    flux = traj.column("flux")
    report = {"side": side}
    if side == "blowup":
        tail = flux[len(flux) // 2:]
        report["curvature_negative"] = bool(np.all(pv < 0))
        report["slope_eventually_decreasing"] = bool(np.all(np.diff(tail) < 0))
        report["delta_negative"] = bool(np.all(dlt < 0))
        report["passed"] = bool(report["curvature_negative"]
                                and report["slope_eventually_decreasing"]
                                and report["delta_negative"])
    else:
        report["delta_positive"] = bool(np.all(dlt > 0))
        report["passed"] = report["delta_positive"]
    return report
