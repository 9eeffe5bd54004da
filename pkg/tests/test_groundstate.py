import numpy as np
import pytest

from nlslab.fields import RadialGrid, sample_profile
from nlslab.groundstate import (
    GroundStateError,
    certified_ground_state,
    gn_constant,
    gn_inequality_check,
    solve_ground_state_fixedpoint,
    solve_ground_state_shooting,
)


class TestShooting:
    def test_center_value(self, gs):
        # high-resolution shooting oracle pins Q(0); literature-level digits
        assert gs.q0 == pytest.approx(4.3374, abs=2e-4)

    def test_pohozaev_residuals(self, gs):
        assert max(gs.pohozaev_residuals()) <= 1e-6

    def test_energy_equals_mass(self, gs):
        # E0(Q) = M(Q) follows from the Pohozaev identities
        assert gs.e0 == pytest.approx(gs.mass_m, rel=1e-8)

    def test_equation_residual(self, gs):
        assert gs.residual <= 1e-6

    def test_free_virial_vanishes(self, gs):
        assert abs(gs.free_virial()) <= 1e-6 * gs.grad_sq

    def test_profile_positive_decreasing(self, gs):
        r = np.linspace(0.0, 25.0, 2000)
        q = gs.profile(r)
        assert np.all(q > 0)
        assert np.all(np.diff(q) < 0)

    def test_unreachable_tolerance_raises(self):
        with pytest.raises(GroundStateError, match="residual"):
            solve_ground_state_shooting(tol=1e-14)

    def test_bad_bracket_raises(self):
        with pytest.raises(GroundStateError, match="bracket"):
            solve_ground_state_shooting(bracket=(5.0, 10.0))

    def test_resolution_consistency(self, gs):
        # independent certification on a coarser working grid agrees
        coarse = solve_ground_state_shooting(grid=RadialGrid(30.0, 2048))
        assert coarse.mass_m == pytest.approx(gs.mass_m, rel=1e-9)


class TestFixedPoint:
    def test_agreement_with_shooting(self, gs):
        fp = solve_ground_state_fixedpoint()
        for name in ("l2_sq", "grad_sq", "l4_fourth"):
            assert getattr(fp, name) == pytest.approx(getattr(gs, name), rel=1e-5)

    def test_gaussian_start_converges(self):
        grid = RadialGrid(30.0, 2048)
        fp = solve_ground_state_fixedpoint(grid, start=np.exp(-grid.r**2))
        assert fp.q0 == pytest.approx(4.3374, abs=1e-3)

    def test_zero_start_rejected(self):
        grid = RadialGrid(30.0, 2048)
        with pytest.raises(GroundStateError, match="trivial"):
            solve_ground_state_fixedpoint(grid, start=np.zeros(grid.size))

    def test_coarse_grid_rejected(self):
        with pytest.raises(ValueError, match="coarse"):
            solve_ground_state_fixedpoint(RadialGrid(30.0, 512))


class TestGagliardoNirenberg:
    def test_constant_and_identity(self, gs):
        c = gn_constant(gs)
        assert c == pytest.approx(gs.c_gn, rel=1e-12)
        # Pohozaev-substituted closed form
        closed = 8.0 * gs.e0 / ((6.0 * gs.e0) ** 1.5 * (2.0 * gs.e0) ** 0.5)
        assert c == pytest.approx(closed, rel=1e-7)

    def test_corrupted_state_detected(self, gs):
        import dataclasses

        bad = dataclasses.replace(gs, l4_fourth=gs.l4_fourth * 1.001)
        with pytest.raises(GroundStateError, match="identity"):
            gn_constant(bad)

    def test_extremizer_slack_zero(self, gs, radial_grid):
        q = gs.field(radial_grid)
        slack = gn_inequality_check(q, gs)
        assert abs(slack) <= 1e-8 * gs.l4_fourth

    def test_gaussian_slack_positive(self, gs, radial_grid):
        f = sample_profile(radial_grid, lambda r: np.exp(-(r**2) / 2))
        assert gn_inequality_check(f, gs) > 0

    def test_zero_field_slack(self, gs, radial_grid):
        from nlslab.fields import zero_field

        assert gn_inequality_check(zero_field(radial_grid), gs) == 0.0


def test_certified_cached():
    assert certified_ground_state() is certified_ground_state()
