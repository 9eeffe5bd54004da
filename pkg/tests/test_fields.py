import struct

import numpy as np
import pytest
import scipy.fft as sfft

from nlslab.fields import (
    CartesianGrid,
    ComplexField,
    FieldError,
    RadialGrid,
    apply_laplacian,
    gradient_norm_sq,
    inner_product,
    integrate_field,
    load_snapshot,
    radial_derivative,
    sample_profile,
    save_snapshot,
    zero_field,
)

from conftest import make_random_field

PI32 = np.pi ** 1.5


class TestGrids:
    def test_radial_nodes_positive_and_uniform(self):
        g = RadialGrid(30.0, 4096)
        assert g.r[0] > 0
        assert np.allclose(np.diff(g.r), g.h)
        assert g.h * g.n == pytest.approx(g.r_max, abs=0)

    def test_cartesian_no_origin_node(self):
        g = CartesianGrid(16.0, 96)
        r = g.radius()
        assert r.min() > 0.2 * g.dx
        # periodic volume equals cell volume times node count
        assert g.dx**3 * g.size == pytest.approx((2 * g.l) ** 3, rel=1e-14)

    def test_bad_grids_rejected(self):
        with pytest.raises(ValueError):
            RadialGrid(-1.0, 64)
        with pytest.raises(ValueError):
            CartesianGrid(16.0, 2)


class TestIntegration:
    def test_zero_field(self, radial_grid):
        assert integrate_field(zero_field(radial_grid)) == 0.0

    def test_gaussian_mass_radial(self, radial_grid):
        f = sample_profile(radial_grid, lambda r: np.exp(-(r**2) / 2))
        assert integrate_field(f) == pytest.approx(PI32, rel=1e-12)

    def test_gaussian_quartic_radial(self, radial_grid):
        f = sample_profile(radial_grid, lambda r: np.exp(-(r**2) / 2))
        val = integrate_field(f, lambda u: np.abs(u) ** 4)
        assert val == pytest.approx((np.pi / 2) ** 1.5, rel=1e-12)

    def test_nonfinite_rejected(self, radial_grid):
        vals = np.ones(radial_grid.size, dtype=complex)
        vals[7] = np.nan
        f = ComplexField(radial_grid, vals)
        with pytest.raises(FieldError, match="node index"):
            integrate_field(f)

    def test_cross_backend_consistency(self):
        # smooth compactly supported bump, both quadratures agree to 1e-4
        def bump(r):
            out = np.zeros_like(r)
            inside = r < 5.0
            out[inside] = np.exp(-1.0 / (1.0 - (r[inside] / 5.0) ** 2))
            return out

        rad = integrate_field(sample_profile(RadialGrid(), bump))
        cart = integrate_field(sample_profile(CartesianGrid(), bump))
        assert cart == pytest.approx(rad, rel=1e-4)


class TestSpectral:
    def test_parseval_roundtrip_radial(self, radial_grid):
        f = make_random_field(radial_grid, 0)
        back = radial_grid.from_modes(radial_grid.to_modes(f.values))
        assert np.max(np.abs(back - f.values)) <= 1e-12 * np.max(np.abs(f.values))

    def test_parseval_roundtrip_cartesian(self):
        g = CartesianGrid(8.0, 32)
        rng = np.random.default_rng(1)
        vals = rng.normal(size=(32, 32, 32)) + 1j * rng.normal(size=(32, 32, 32))
        back = sfft.ifftn(sfft.fftn(vals))
        assert np.max(np.abs(back - vals)) <= 1e-12 * np.max(np.abs(vals))

    def test_gradient_gaussian(self, radial_grid):
        f = sample_profile(radial_grid, lambda r: np.exp(-(r**2) / 2))
        assert gradient_norm_sq(f) == pytest.approx(1.5 * PI32, rel=1e-12)

    def test_gradient_matches_laplacian_form(self, radial_grid):
        f = make_random_field(radial_grid, 2)
        lhs = gradient_norm_sq(f)
        rhs = -np.real(inner_product(apply_laplacian(f), f))
        assert abs(lhs - rhs) <= 1e-10 * lhs

    def test_gradient_matches_laplacian_form_cartesian(self):
        g = CartesianGrid(8.0, 48)
        rng = np.random.default_rng(3)
        raw = rng.normal(size=(48, 48, 48)) + 1j * rng.normal(size=(48, 48, 48))
        smooth = sfft.ifftn(sfft.fftn(raw) * np.exp(-g.k_sq() / 4.0))
        f = ComplexField(g, smooth)
        lhs = gradient_norm_sq(f)
        rhs = -np.real(inner_product(apply_laplacian(f), f))
        assert abs(lhs - rhs) <= 1e-10 * lhs

    def test_laplacian_eigenmode(self):
        g = RadialGrid(30.0, 512)
        k0 = 11
        vals = np.sin(k0 * np.pi * g.r / g.r_max) / g.r
        f = ComplexField(g, vals)
        lam = (k0 * np.pi / g.r_max) ** 2
        out = apply_laplacian(f)
        assert np.allclose(out.values, -lam * vals, rtol=1e-10, atol=1e-12)

    def test_laplacian_self_adjoint(self, radial_grid):
        f = make_random_field(radial_grid, 4)
        g = make_random_field(radial_grid, 5)
        lhs = inner_product(apply_laplacian(f), g)
        rhs = inner_product(f, apply_laplacian(g))
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)

    def test_radial_derivative_gaussian(self, radial_grid):
        f = sample_profile(radial_grid, lambda r: np.exp(-(r**2) / 2))
        du = radial_derivative(f)
        exact = -radial_grid.r * np.exp(-(radial_grid.r ** 2) / 2)
        assert np.max(np.abs(du - exact)) <= 1e-9


class TestSampling:
    def test_zero_profile(self, radial_grid):
        f = sample_profile(radial_grid, lambda r: np.zeros_like(r))
        assert integrate_field(f) == 0.0

    def test_ground_state_mass_vs_oracle(self, gs, radial_grid):
        f = sample_profile(radial_grid, gs.profile)
        assert integrate_field(f) == pytest.approx(gs.l2_sq, rel=1e-8)

    def test_translation_invariance(self, gs):
        g = CartesianGrid(16.0, 96)
        m0 = integrate_field(sample_profile(g, gs.profile, center=(0, 0, 0)))
        m3 = integrate_field(sample_profile(g, gs.profile, center=(3.0, 0, 0)))
        assert m3 == pytest.approx(m0, rel=1e-6)

    def test_radial_center_rejected(self, radial_grid, gs):
        with pytest.raises(ValueError, match="radial"):
            sample_profile(radial_grid, gs.profile, center=(1.0, 0, 0))


class TestSnapshots:
    def test_roundtrip_radial(self, tmp_path, radial_grid):
        f = make_random_field(radial_grid, 6)
        path = tmp_path / "f.nlsf"
        save_snapshot(path, f, time=1.25)
        g, t = load_snapshot(path)
        assert t == 1.25
        assert isinstance(g.grid, RadialGrid)
        assert g.grid.r_max == radial_grid.r_max and g.grid.n == radial_grid.n
        np.testing.assert_array_equal(g.values, f.values)

    def test_roundtrip_cartesian(self, tmp_path):
        grid = CartesianGrid(8.0, 16)
        rng = np.random.default_rng(7)
        f = ComplexField(grid, rng.normal(size=(16,) * 3)
                         + 1j * rng.normal(size=(16,) * 3))
        path = tmp_path / "c.nlsf"
        save_snapshot(path, f, time=0.5)
        g, t = load_snapshot(path)
        assert isinstance(g.grid, CartesianGrid)
        np.testing.assert_array_equal(g.values, f.values)

    def test_header_layout(self, tmp_path):
        grid = RadialGrid(30.0, 64)
        f = zero_field(grid)
        path = tmp_path / "h.nlsf"
        save_snapshot(path, f, time=2.0)
        raw = path.read_bytes()
        magic, version, kind, extent, count, nodes, t = struct.unpack(
            "<4sIB3xdQQd", raw[: struct.calcsize("<4sIB3xdQQd")])
        assert magic == b"NLSF" and version == 1 and kind == 1
        assert extent == 30.0 and count == 64 and nodes == 63 and t == 2.0
        assert len(raw) == struct.calcsize("<4sIB3xdQQd") + 16 * nodes

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.nlsf"
        path.write_bytes(b"\x00" * 64)
        with pytest.raises(ValueError, match="snapshot"):
            load_snapshot(path)
