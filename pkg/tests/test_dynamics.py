import math

import numpy as np
import pytest

from nlslab.fields import ComplexField, RadialGrid, sample_profile, zero_field
from nlslab.functionals import PotentialSpec
from nlslab.dynamics import (
    ConfigurationError,
    SolverSettings,
    Trajectory,
    evolve,
    strang_step,
    variance_convexity_check,
    virial_identity_check,
    _Propagator,
)

from conftest import make_random_field

FREE = PotentialSpec.free()
POT = PotentialSpec(1.0, 1.5)


class TestSettings:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            SolverSettings(dt0=1e-9, dt_min=1e-8)
        with pytest.raises(ConfigurationError):
            SolverSettings(blowup_gradfactor=0.5)
        with pytest.raises(ConfigurationError):
            SolverSettings(order=3)

    def test_sponge_depth(self):
        st = SolverSettings()
        assert st.sponge_depth(30.0) == pytest.approx(6.0)
        with pytest.raises(ConfigurationError):
            SolverSettings(sponge_width=20.0).sponge_depth(30.0)


class TestStrangStep:
    def test_zero_stays_zero(self, radial_grid):
        out = strang_step(zero_field(radial_grid), 1e-2, POT)
        assert np.all(out.values == 0)

    def test_bad_dt(self, radial_grid):
        with pytest.raises(ValueError):
            strang_step(zero_field(radial_grid), -1.0, POT)

    def test_mu_guard(self, radial_grid):
        with pytest.raises(ValueError, match="mu > 1"):
            strang_step(zero_field(radial_grid), 1e-2, PotentialSpec(1.0, 0.5))

    @pytest.mark.parametrize("pot", [FREE, POT])
    def test_mass_isometry(self, radial_grid, pot):
        f = make_random_field(radial_grid, 11)
        m0 = radial_grid.quad(np.abs(f.values) ** 2)
        out = strang_step(f, 1e-3, pot)
        m1 = radial_grid.quad(np.abs(out.values) ** 2)
        assert m1 == pytest.approx(m0, rel=1e-12)

    def test_linear_gaussian_exact(self, radial_grid):
        # nonlinearity off, a = 0: the discrete propagator is exact
        g0 = sample_profile(radial_grid, lambda r: np.exp(-(r**2) / 2))
        prop = _Propagator(radial_grid, FREE, nonlinearity=False)
        vals = g0.values.copy()
        for _ in range(1000):
            vals = prop.step(vals, 1e-3)
        beta = 1 + 2j
        exact = beta**-1.5 * np.exp(-(radial_grid.r ** 2) / (2 * beta))
        err = math.sqrt(radial_grid.quad(np.abs(vals - exact) ** 2))
        assert err <= 1e-8

    def test_soliton_phase_rotation(self, gs, radial_grid):
        # e^{it} Q under the free flow; horizon kept inside the window where
        # the (physical) soliton instability has not yet amplified the
        # splitting error (growth rate about 5.4 per time unit)
        q = gs.field(radial_grid).values
        prop = _Propagator(radial_grid, FREE)
        vals = q.copy()
        dt, t_end = 1e-4, 0.5
        for _ in range(int(round(t_end / dt))):
            vals = prop.step(vals, dt)
        err = math.sqrt(radial_grid.quad(np.abs(vals - np.exp(1j * t_end) * q) ** 2)
                        / radial_grid.quad(np.abs(q) ** 2))
        assert err <= 1e-5


class TestEvolve:
    def test_records_monotone_and_status(self, radial_grid, gs):
        u0 = ComplexField(radial_grid, 0.3 * gs.field(radial_grid).values)
        st = SolverSettings(dt0=2e-3, t_end=0.1, record_every=10,
                            record_l5=False)
        traj = evolve(u0, FREE, st, gs)
        assert traj.status == "completed"
        t = traj.column("t")
        assert np.all(np.diff(t) > 0)
        assert traj.t_final == pytest.approx(0.1, rel=1e-9)

    def test_short_conservation(self, radial_grid, gs):
        u0 = ComplexField(radial_grid, 0.3 * gs.field(radial_grid).values)
        st = SolverSettings(dt0=2e-3, t_end=0.5, record_every=25,
                            adapt_on=False, record_l5=False)
        traj = evolve(u0, POT, st, gs)
        m = traj.column("mass")
        e = traj.column("energy")
        assert np.max(np.abs(m - m[0])) <= 1e-11 * m[0]
        assert np.max(np.abs(e - e[0])) <= 1e-5 * abs(e[0])

    def test_time_reversal_symmetry(self, radial_grid, gs):
        # evolve, conjugate, evolve, conjugate returns the initial state
        u0 = ComplexField(radial_grid, 0.4 * gs.field(radial_grid).values)
        st = SolverSettings(dt0=1e-3, t_end=0.3, record_every=1000,
                            adapt_on=False, record_l5=False)
        fwd = evolve(u0, POT, st, gs)
        back = evolve(ComplexField(radial_grid, np.conj(fwd.u_final.values)),
                      POT, st, gs)
        final = np.conj(back.u_final.values)
        err = math.sqrt(radial_grid.quad(np.abs(final - u0.values) ** 2)
                        / radial_grid.quad(np.abs(u0.values) ** 2))
        assert err <= 1e-8

    def test_sponge_absorbs(self, radial_grid, gs):
        # an outgoing gaussian pulse is eaten by the absorbing layer
        vals = np.exp(-((radial_grid.r - 10.0) ** 2) / 2) * np.exp(
            2j * radial_grid.r)
        u0 = ComplexField(radial_grid, vals)
        st = SolverSettings(dt0=2e-3, t_end=12.0, record_every=50,
                            sponge_on=True, absorb_done=0.5,
                            adapt_on=False, nonlinearity_on=False,
                            record_l5=False)
        traj = evolve(u0, FREE, st, gs)
        assert traj.status == "sponge_absorbed"
        m = traj.column("mass")
        assert m[-1] < 0.6 * m[0]

    def test_record_callback(self, radial_grid, gs):
        seen = []
        u0 = ComplexField(radial_grid, 0.2 * gs.field(radial_grid).values)
        st = SolverSettings(dt0=2e-3, t_end=0.05, record_every=5,
                            record_l5=False)
        evolve(u0, FREE, st, gs, record_callback=lambda t, f: seen.append(t))
        assert len(seen) >= 3

    def test_snapshots_kept(self, radial_grid, gs):
        u0 = ComplexField(radial_grid, 0.2 * gs.field(radial_grid).values)
        st = SolverSettings(dt0=2e-3, t_end=0.1, record_every=5,
                            snapshot_every=0.04, record_l5=False)
        traj = evolve(u0, FREE, st, gs)
        assert len(traj.snapshots) >= 3
        assert traj.snapshots[0][0] == 0.0


class TestTrajectoryChecks:
    def test_virial_check_needs_records(self, radial_grid):
        traj = Trajectory(grid=radial_grid, pot=FREE, settings=SolverSettings())
        with pytest.raises(ValueError, match="records"):
            virial_identity_check(traj, 2.0)

    def test_linear_gaussian_residual(self, radial_grid, gs):
        g0 = sample_profile(radial_grid, lambda r: np.exp(-(r**2) / 2))
        st = SolverSettings(dt0=5e-4, t_end=0.5, record_every=1,
                            adapt_on=False, nonlinearity_on=False,
                            weight_radii=(2.0, math.inf), record_l5=False)
        traj = evolve(g0, FREE, st, gs)
        assert virial_identity_check(traj, 2.0) <= 1e-4
        assert virial_identity_check(traj, math.inf) <= 1e-8

    def test_variance_convexity_scattering_side(self, radial_grid, gs):
        u0 = ComplexField(radial_grid, 0.3 * gs.field(radial_grid).values)
        st = SolverSettings(dt0=2e-3, t_end=0.3, record_every=10,
                            record_l5=False)
        traj = evolve(u0, POT, st, gs)
        report = variance_convexity_check(traj)
        assert report["side"] == "scattering"
        assert report["passed"]
        # deep sub-threshold data keeps a positive virial throughout
        assert np.all(traj.column("pv") > 0)
