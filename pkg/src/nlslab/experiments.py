"""Initial-data constructors for the threshold regimes, the trajectory
classifier, and the study harnesses (dichotomy, space-time-norm growth,
soliton residual decay, constrained-action non-attainment).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import InterpolatedUnivariateSpline
from scipy.optimize import brentq

from .fields import CartesianGrid, ComplexField, RadialGrid, sample_profile
from .functionals import (
    PotentialSpec,
    energy,
    l2_norm_sq,
    l4_norm_fourth,
    mass,
    potential_term,
    virial,
)
from .fields import gradient_norm_sq
from .dynamics import (
    STATUS_BLOWUP,
    STATUS_COMPLETED,
    SolverSettings,
    Trajectory,
    evolve,
)
from .groundstate import GroundState, certified_ground_state

__all__ = [
    "DataFamily",
    "Verdict",
    "make_threshold_scaling",
    "rescale_to_threshold_mass",
    "make_translated_family",
    "l5_norm",
    "run_threshold_growth_study",
    "soliton_residual_decay",
    "classify",
    "zero_virial_action_sweep",
]


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class DataFamily:
    """Named initial-data recipe plus its parameters."""

    kind: str                      # scaled_groundstate | translated_groundstate |
    #                                gaussian | custom_profile
    parameters: dict = field(default_factory=dict)
    potential: PotentialSpec = PotentialSpec.free()

    _KINDS = ("scaled_groundstate", "translated_groundstate", "gaussian",
              "custom_profile")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown data family {self.kind!r}")

    def build(self, grid, gs: GroundState | None = None) -> ComplexField:
        gs = gs or certified_ground_state()
        p = self.parameters
        if self.kind == "scaled_groundstate":
            if "c" in p:
                c = float(p["c"])
            else:
                c, _ = make_threshold_scaling(self.potential, gs,
                                              branch=p.get("branch", "sub"),
                                              grid=grid)
            return ComplexField(grid, c * gs.field(grid).values)
        if self.kind == "translated_groundstate":
            eps = float(p.get("eps", 0.0))
            center = tuple(p.get("center", (0.0, 0.0, 0.0)))
            f = sample_profile(grid, gs.profile, center=center)
            return ComplexField(grid, (1.0 - eps) * f.values)
        if self.kind == "gaussian":
            width = float(p.get("width", 1.0))
            amp = float(p.get("amplitude", 1.0))
            return sample_profile(
                grid, lambda r: amp * np.exp(-(r / width) ** 2 / 2.0),
                center=tuple(p.get("center", (0.0, 0.0, 0.0))))
        raise ValueError("custom_profile families are built by the caller")


@dataclass(frozen=True)
class Verdict:
    outcome: str  # Scattering | BlowUp | Undecided
    evidence: dict


# ---------------------------------------------------------------------------
# threshold data
# ---------------------------------------------------------------------------

def make_threshold_scaling(pot: PotentialSpec, gs: GroundState,
                           branch: str = "sub",
                           grid: RadialGrid | None = None):
    """Amplitude c with E_V(cQ) M(cQ) = E_0(Q) M(Q), on the requested branch.

    Expanding with the Pohozaev identities, s = c^2 solves the cubic
    2 E0 s^3 - (3 E0 + V_Q/2) s^2 + E0 = 0 with V_Q = int V |Q|^2; the sign
    pattern (positive at 0 and infinity, -V_Q/2 at s = 1) brackets one root
    in (0,1), where P_V(cQ) > 0, and one in (1,inf), where P_V(cQ) < 0.
    The root is then polished against the grid-evaluated product so the
    constructed datum hits the threshold to solver precision, and the virial
    sign is verified by direct evaluation before returning.
    """
    if branch not in ("sub", "super"):
        raise ValueError("branch must be 'sub' or 'super'")
    grid = grid or RadialGrid()
    q_field = gs.field(grid)
    if pot.a == 0.0:
        return 1.0, q_field

    e0 = gs.e0
    target = gs.e0 * gs.mass_m
    v_q = potential_term(q_field, pot)

    def reduced_cubic(s):
        return 2.0 * e0 * s**3 - (3.0 * e0 + 0.5 * v_q) * s**2 + e0

    if branch == "sub":
        bracket = (1e-9, 1.0)
    else:
        s_hi = 2.0
        while reduced_cubic(s_hi) < 0:
            s_hi *= 2.0
            if s_hi > 1e6:
                raise ExperimentError("no super-branch root below s = 1e6")
        bracket = (1.0, s_hi)
    if reduced_cubic(bracket[0]) * reduced_cubic(bracket[1]) >= 0:
        raise ExperimentError(f"cubic does not change sign on {bracket}")
    s = brentq(reduced_cubic, *bracket, xtol=1e-15, rtol=8.9e-16)

    # polish on the exact grid-evaluated product (cancels quadrature bias)
    k_g = gradient_norm_sq(q_field)
    g4_g = l4_norm_fourth(q_field)
    m_g = mass(q_field)

    def product_gap(s):
        e_v = 0.5 * s * (k_g + v_q) - 0.25 * s**2 * g4_g
        return e_v * s * m_g - target

    lo, hi = (0.5 * s, min(1.0, 1.5 * s)) if branch == "sub" else (max(1.0, 0.9 * s), 1.2 * s)
    if product_gap(lo) * product_gap(hi) < 0:
        s = brentq(product_gap, lo, hi, xtol=1e-15, rtol=8.9e-16)

    c = math.sqrt(s)
    u0 = ComplexField(grid, c * q_field.values)
    pv = virial(u0, pot)
    if branch == "sub" and pv <= 0:
        raise ExperimentError(f"sub branch produced P_V = {pv:.3e} <= 0")
    if branch == "super" and pv >= 0:
        raise ExperimentError(f"super branch produced P_V = {pv:.3e} >= 0")
    return c, u0


def rescale_to_threshold_mass(u0: ComplexField, pot: PotentialSpec,
                              gs: GroundState | None = None):
    """Mass-normalizing rescale v0(x) = lam u0(lam x), lam = M(u0)/M(Q).

    Returns (v0, rescaled potential with coupling lam^{2-mu} a).  The product
    E_V(u0) M(u0) is invariant; both that and M(v0) = M(Q) are asserted to
    1e-8 relative.
    """
    gs = gs or certified_ground_state()
    m0 = mass(u0)
    if m0 == 0.0:
        raise ValueError("zero field cannot be rescaled")
    lam = m0 / gs.mass_m
    grid = u0.grid
    if isinstance(grid, RadialGrid):
        re = InterpolatedUnivariateSpline(grid.r, u0.values.real, k=5, ext=1)
        im = InterpolatedUnivariateSpline(grid.r, u0.values.imag, k=5, ext=1)
        vals = lam * (re(lam * grid.r) + 1j * im(lam * grid.r))
    else:
        from scipy.interpolate import RegularGridInterpolator

        pts = (grid.axis, grid.axis, grid.axis)
        interp_re = RegularGridInterpolator(pts, u0.values.real,
                                            bounds_error=False, fill_value=0.0)
        interp_im = RegularGridInterpolator(pts, u0.values.imag,
                                            bounds_error=False, fill_value=0.0)
        x, y, z = grid.meshgrid()
        q = np.column_stack([lam * x.ravel(), lam * y.ravel(), lam * z.ravel()])
        vals = lam * (interp_re(q) + 1j * interp_im(q)).reshape(x.shape)
    v0 = ComplexField(grid, vals)
    pot_scaled = PotentialSpec(lam ** (2.0 - pot.mu) * pot.a, pot.mu)

    m_new = mass(v0)
    if abs(m_new - gs.mass_m) > 1e-8 * gs.mass_m:
        raise ExperimentError(
            f"rescaled mass off threshold: {m_new:.12g} vs {gs.mass_m:.12g}")
    before = energy(u0, pot) * m0
    after = energy(v0, pot_scaled) * m_new
    if abs(after - before) > 1e-8 * max(abs(before), 1e-12):
        raise ExperimentError(
            f"mass-energy product not preserved: {after:.12g} vs {before:.12g}")
    return v0, pot_scaled


def make_translated_family(gs: GroundState, eps_n, x_n, grid: CartesianGrid,
                           pot: PotentialSpec):
    """Data (1 - eps_n) Q(. - x_n) with per-datum threshold-gap report.

    Requires |x_n| plus the effective support radius of Q to fit in the box.
    Returns (fields, rows); each row holds the mass-energy gap to M(Q)^2
    (negative, shrinking along the sequence) and the virial (positive).
    """
    support = gs.effective_support_radius(1e-4)
    fields = []
    rows = []
    for eps, x in zip(eps_n, x_n):
        center = np.asarray(x, dtype=float)
        if np.linalg.norm(center) + support > grid.l:
            raise ExperimentError(
                f"datum at |x| = {np.linalg.norm(center):.2f} overflows the box "
                f"(support radius {support:.2f}, half-width {grid.l})")
        f = sample_profile(grid, gs.profile, center=center)
        u0 = ComplexField(grid, (1.0 - eps) * f.values)
        gap = energy(u0, pot) * mass(u0) - gs.mass_m**2
        rows.append({
            "eps": float(eps),
            "center_norm": float(np.linalg.norm(center)),
            "mass_energy_gap": gap,
            "pv": virial(u0, pot),
        })
        fields.append(u0)
    return fields, rows


# ---------------------------------------------------------------------------
# space-time norms and studies
# ---------------------------------------------------------------------------

def l5_norm(traj: Trajectory, t_window: tuple[float, float],
            max_spacing: float = 0.05) -> float:
    """Space-time L^5 norm over the window, by trapezoid in time over the
    recorded int |u|^5 diagnostics."""
    t = traj.column("t")
    dens = traj.column("int_abs5")
    lo, hi = t_window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if np.count_nonzero(sel) < 2:
        raise ExperimentError("window contains fewer than 2 records")
    ts, ds = t[sel], dens[sel]
    if np.any(~np.isfinite(ds)):
        raise ExperimentError("trajectory lacks the |u|^5 diagnostic")
    if np.max(np.diff(ts)) > max_spacing + 1e-12:
        raise ExperimentError(
            f"record spacing {np.max(np.diff(ts)):.3f} exceeds {max_spacing}")
    return float(np.trapezoid(ds, ts) ** 0.2)


def time_near_soliton(traj: Trajectory, gs: GroundState, delta0: float) -> float:
    """Measure of record time with |delta(t)| < delta0 (trapezoid count)."""
    t = traj.column("t")
    inside = np.abs(traj.column("delta")) < delta0
    total = 0.0
    for k in range(len(t) - 1):
        if inside[k] and inside[k + 1]:
            total += t[k + 1] - t[k]
        elif inside[k] != inside[k + 1]:
            total += 0.5 * (t[k + 1] - t[k])
    return total


def run_threshold_growth_study(eps_list, x_list, pot: PotentialSpec, T: float,
                               grid: CartesianGrid | None = None,
                               gs: GroundState | None = None,
                               settings: SolverSettings | None = None,
                               delta0: float | None = None):
    """Evolve the translated family to horizon T; tabulate the window-L^5
    norm and the near-soliton duration per datum.

    delta0 defaults to 0.8 ||grad Q||^2: the duration then measures how long
    the adapted-norm content stays above 20% of the soliton level before
    dispersing into the absorbing layer, which orders the family strictly.
    Per-run failures are recorded and the study continues.
    """
    gs = gs or certified_ground_state()
    grid = grid or CartesianGrid()
    delta0 = 0.8 * gs.grad_sq if delta0 is None else delta0
    settings = settings or SolverSettings(
        dt0=1e-2, t_end=T, record_every=5, sponge_on=True,
        adapt_on=False, record_l5=True, keep_snapshots=False)
    fields, rows = make_translated_family(gs, eps_list, x_list, grid, pot)
    for n, (u0, row) in enumerate(zip(fields, rows)):
        row["n"] = n
        try:
            traj = evolve(u0, pot, settings, gs)
            row["status"] = traj.status
            row["l5_window"] = l5_norm(traj, (0.0, traj.t_final))
            row["time_near_soliton"] = time_near_soliton(traj, gs, delta0)
            row["delta0"] = delta0
        except Exception as exc:  # study continues; failure is data
            row["status"] = f"failed: {exc}"
            row["l5_window"] = math.nan
            row["time_near_soliton"] = math.nan
    return rows


# ---------------------------------------------------------------------------
# soliton residual decay
# ---------------------------------------------------------------------------

def _cutoff(grid: CartesianGrid, separation: float):
    """Smooth chi: 0 where |x| < sep/4, 1 where |x| > sep/2, with analytic
    first and second derivatives."""
    x, y, z = grid.meshgrid()
    r = np.sqrt(x * x + y * y + z * z)
    lo, hi = separation / 4.0, separation / 2.0
    s = np.clip((r - lo) / (hi - lo), 0.0, 1.0)
    chi = s**3 * (10.0 - 15.0 * s + 6.0 * s * s)
    ds = np.where((s > 0) & (s < 1), 30.0 * s**2 * (1.0 - s) ** 2 / (hi - lo), 0.0)
    d2s = np.where((s > 0) & (s < 1),
                   60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (hi - lo) ** 2, 0.0)
    return r, chi, ds, d2s


def soliton_residual_decay(gs: GroundState, eps: float, x_list, pot: PotentialSpec,
                           grid: CartesianGrid | None = None,
                           use_cutoff: bool = True):
    """L^2 size of the three residual terms of the cut-off soliton ansatz
    (1-eps) e^{it} [chi Q](. - x_n) at t = 0, per separation |x_n|.

    Terms: the cubic cutoff mismatch ((1-eps)^3 chi^3 - (1-eps) chi) Q^3,
    the commutator (Q Lap(chi) + 2 grad(chi) . grad(Q)), and the potential
    term -V (1-eps) chi Q.  The first two inherit the exponential tail of Q;
    the potential term decays like |x_n|^{-mu}.
    """
    grid = grid or CartesianGrid(l=20.0, m=160)
    amp = 1.0 - eps
    rows = []
    for x_c in x_list:
        center = np.asarray(x_c, dtype=float)
        sep = float(np.linalg.norm(center))
        if use_cutoff and sep <= 0:
            raise ExperimentError("cutoff requires a nonzero separation")
        x, y, z = grid.meshgrid()
        rho = np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2
                      + (z - center[2]) ** 2)
        rho = np.maximum(rho, 1e-12)
        q = gs.profile(rho)
        dq = gs.profile.deriv(rho)
        if use_cutoff:
            r, chi, dchi_dr, d2chi_dr2 = _cutoff(grid, sep)
            if sep / 2.0 + gs.effective_support_radius(1e-4) > 2.0 * grid.l:
                raise ExperimentError("cutoff shell exceeds the grid")
            lap_chi = d2chi_dr2 + 2.0 * dchi_dr / np.maximum(r, 1e-12)
            # grad(chi) . grad(Q) = chi'(r) Q'(rho) (x.(x-c))/(r rho)
            cosang = (x * (x - center[0]) + y * (y - center[1])
                      + z * (z - center[2])) / (np.maximum(r, 1e-12) * rho)
            cross = dchi_dr * dq * cosang
        else:
            r = np.sqrt(x * x + y * y + z * z)
            chi = np.ones_like(q)
            lap_chi = np.zeros_like(q)
            cross = np.zeros_like(q)

        e_cubic = (amp**3 * chi**3 - amp * chi) * q**3
        e_comm = amp * (q * lap_chi + 2.0 * cross)
        if pot.a > 0:
            e_pot = -pot.a * np.maximum(r, 1e-12) ** (-pot.mu) * amp * chi * q
        else:
            e_pot = np.zeros_like(q)
        rows.append({
            "separation": sep,
            "cubic_l2": math.sqrt(grid.quad(e_cubic**2)),
            "commutator_l2": math.sqrt(grid.quad(e_comm**2)),
            "potential_l2": math.sqrt(grid.quad(e_pot**2)),
        })
    return rows


# ---------------------------------------------------------------------------
# classifier
# ---------------------------------------------------------------------------

def classify(traj: Trajectory, dispersion_ratio: float = 0.05,
             tail_fraction: float = 0.2) -> Verdict:
    """Blow-up / scattering / undecided from the recorded diagnostics.

    BlowUp: terminal status blowup_detected and delta < 0 at every record.
    Scattering: completed, delta > 0 at every record, and the L^4 dispersion
    ratio sustained below the threshold over the final fifth of the horizon.
    Anything else (including any delta sign change) is Undecided.
    """
    dlt = traj.column("delta")
    l4 = traj.column("l4")
    t = traj.column("t")
    ratio = l4 / l4[0] if l4[0] > 0 else l4
    tail = t >= traj.settings.t_end * (1.0 - tail_fraction)
    evidence = {
        "terminal_status": traj.status,
        "delta_min": float(np.min(dlt)),
        "delta_max": float(np.max(dlt)),
        "pv_min": float(np.min(traj.column("pv"))),
        "pv_max": float(np.max(traj.column("pv"))),
        "dispersion_ratio_end": float(ratio[-1]) if len(ratio) else math.nan,
        "blowup_time_estimate": traj.t_final if traj.status == STATUS_BLOWUP else None,
    }
    if traj.status == STATUS_BLOWUP and np.all(dlt < 0):
        return Verdict("BlowUp", evidence)
    sustained = bool(np.count_nonzero(tail) > 0
                     and np.all(ratio[tail] <= dispersion_ratio))
    evidence["dispersion_sustained"] = sustained
    if traj.status == STATUS_COMPLETED and np.all(dlt > 0) and sustained:
        return Verdict("Scattering", evidence)
    return Verdict("Undecided", evidence)


# ---------------------------------------------------------------------------
# constrained-action non-attainment sweep
# ---------------------------------------------------------------------------

def _translated_potential_weight(gs: GroundState, pot: PotentialSpec,
                                 y: float) -> float:
    """W(y) = int V |Q(. - y e)|^2 by the angular reduction to one dimension:
    for radial h, int h(|x|) g(|x - y e|) dx
      = (2 pi / y) int_0^inf s g(s) [Hh(s + y) - Hh(|s - y|)] ds,
    with Hh the primitive of t h(t) t; here h = a t^{-mu}."""
    if pot.a == 0.0:
        return 0.0
    mu = pot.mu
    if y == 0.0:
        val, _ = quad(lambda s: s ** (2.0 - mu) * gs.profile(s) ** 2,
                      0.0, 30.0, limit=200)
        return 4.0 * np.pi * pot.a * val

    p = 2.0 - mu

    def integrand(s):
        return s * gs.profile(s) ** 2 * ((y + s) ** p - abs(y - s) ** p) / p

    val, _ = quad(integrand, 0.0, 30.0, points=[y] if y < 30.0 else None,
                  limit=200)
    return 2.0 * np.pi * pot.a / y * val


def zero_virial_action_sweep(gs: GroundState, pot: PotentialSpec, y_list):
    """S_V on the zero-virial rescalings t_y Q(. - y): the constrained-action
    values sit strictly above S_0(Q) = 2 E_0(Q) and decrease toward it as the
    translation grows (the infimum is never attained for a > 0).

    P_V(t Q(. - y)) = 0 gives t^2 = (2 ||grad Q||^2 + mu W(y)) / (3/2 ||Q||_4^4),
    with W(y) = int V |Q(. - y)|^2 evaluated by adaptive 1D quadrature.
    """
    k = gs.grad_sq
    g4 = gs.l4_fourth
    l2 = gs.l2_sq
    rows = []
    for y in y_list:
        try:
            w = _translated_potential_weight(gs, pot, float(y))
            t_sq = (2.0 * k + pot.mu * w) / (1.5 * g4)
            s_v = 0.5 * t_sq * (k + w + l2) - 0.25 * t_sq**2 * g4
            rows.append({"y": float(y), "amplitude": math.sqrt(t_sq),
                         "action": float(s_v), "potential_weight": w,
                         "valid": bool(np.isfinite(s_v))})
        except Exception as exc:
            rows.append({"y": float(y), "amplitude": math.nan,
                         "action": math.nan, "potential_weight": math.nan,
                         "valid": False, "error": str(exc)})
    return rows
