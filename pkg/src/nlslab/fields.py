"""Grids, spectral transforms and calculus for radial / 3D Cartesian complex fields.

Radial functions u(r) on (0, r_max) are handled through the substitution
v(r) = r*u(r) with Dirichlet ends v(0) = v(r_max) = 0, expanded in the sine
basis sin(k*pi*r/r_max).  This diagonalizes the 3D radial Laplacian exactly
(eigenvalue -(k*pi/r_max)^2 on v) and keeps every node strictly away from
r = 0, where the inverse-power potential is singular.

Cartesian grids are periodic FFT boxes shifted by half a cell per axis, so no
node sits at the origin.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

__all__ = [
    "RadialGrid",
    "CartesianGrid",
    "ComplexField",
    "integrate_field",
    "gradient_norm_sq",
    "apply_laplacian",
    "radial_derivative",
    "sample_profile",
    "save_snapshot",
    "load_snapshot",
]


class FieldError(ValueError):
    """Invalid field data (non-finite entries, grid mismatch, ...)."""


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    """Interior nodes r_j = j*h, j = 1..n-1, with h = r_max/n.

    The origin and the truncation radius are not nodes; fields are implicitly
    zero at both (Dirichlet on v = r*u).
    """

    r_max: float = 30.0
    n: int = 4096
    r: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.r_max <= 0 or self.n < 8:
            raise ValueError(f"bad radial grid: r_max={self.r_max}, n={self.n}")
        r = self.h * np.arange(1, self.n)
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @property
    def h(self) -> float:
        return self.r_max / self.n

    @property
    def size(self) -> int:
        return self.n - 1

    @property
    def laplacian_eigenvalues(self) -> np.ndarray:
        """lambda_k = (k*pi/r_max)^2, k = 1..n-1; -Delta v = lambda v modewise."""
        k = np.arange(1, self.n)
        return (k * np.pi / self.r_max) ** 2

    # sine-coefficient convention: v_j = sum_k c_k sin(pi k j / n)
    def to_modes(self, values: np.ndarray) -> np.ndarray:
        v = self.r * values
        return sfft.dst(v, type=1) / (2.0 * self.n)

    def from_modes(self, coeff: np.ndarray) -> np.ndarray:
        v = sfft.dst(coeff, type=1)
        return v / self.r

    def quad(self, integrand: np.ndarray) -> float:
        """4*pi * sum h r^2 g(r).  Trapezoid-consistent: both end nodes carry
        zero contribution (r = 0 weight, exponential decay at r_max)."""
        return float(4.0 * np.pi * self.h * np.sum(self.r**2 * integrand))


@dataclass(frozen=True)
class CartesianGrid:
    """Periodic box [-l, l)^3 with m points per axis, shifted half a cell."""

    l: float = 16.0
    m: int = 96
    axis: np.ndarray = field(init=False, repr=False, compare=False)
    k_axis: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.l <= 0 or self.m < 8:
            raise ValueError(f"bad cartesian grid: l={self.l}, m={self.m}")
        d = self.dx
        ax = -self.l + (np.arange(self.m) + 0.5) * d
        k = 2.0 * np.pi * sfft.fftfreq(self.m, d=d)
        ax.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "axis", ax)
        object.__setattr__(self, "k_axis", k)

    @property
    def dx(self) -> float:
        return 2.0 * self.l / self.m

    @property
    def size(self) -> int:
        return self.m**3

    @property
    def offset(self) -> float:
        return 0.5 * self.dx

    def meshgrid(self):
        return np.meshgrid(self.axis, self.axis, self.axis, indexing="ij")

    def radius(self) -> np.ndarray:
        x, y, z = self.meshgrid()
        return np.sqrt(x * x + y * y + z * z)

    def k_sq(self) -> np.ndarray:
        kx, ky, kz = np.meshgrid(self.k_axis, self.k_axis, self.k_axis, indexing="ij")
        return kx * kx + ky * ky + kz * kz

    def quad(self, integrand: np.ndarray) -> float:
        return float(self.dx**3 * np.sum(integrand))


Grid = RadialGrid | CartesianGrid


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComplexField:
    """Complex amplitude per grid node.  Immutable once constructed."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if isinstance(self.grid, RadialGrid):
            expected = (self.grid.size,)
        else:
            expected = (self.grid.m,) * 3
        if vals.shape != expected:
            raise FieldError(f"field shape {vals.shape} != grid shape {expected}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def require_finite(self) -> None:
        bad = ~np.isfinite(self.values)
        if bad.any():
            idx = np.unravel_index(int(np.argmax(bad)), self.values.shape)
            raise FieldError(f"non-finite field value at node index {idx}")

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values).all())

    def with_values(self, values: np.ndarray) -> "ComplexField":
        return ComplexField(self.grid, values)

    def __add__(self, other: "ComplexField") -> "ComplexField":
        return ComplexField(self.grid, self.values + other.values)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        return ComplexField(self.grid, self.values - other.values)

    def __rmul__(self, c) -> "ComplexField":
        return ComplexField(self.grid, c * self.values)


def zero_field(grid: Grid) -> ComplexField:
    if isinstance(grid, RadialGrid):
        return ComplexField(grid, np.zeros(grid.size, dtype=np.complex128))
    return ComplexField(grid, np.zeros((grid.m,) * 3, dtype=np.complex128))


# ---------------------------------------------------------------------------
# calculus
# ---------------------------------------------------------------------------

def integrate_field(f: ComplexField, integrand=None) -> float:
    """Integral over R^3 of integrand(u); default integrand is |u|^2.

    Radial: 4*pi*sum h r_j^2 g; Cartesian: cell-volume-weighted sum.
    """
    f.require_finite()
    g = np.abs(f.values) ** 2 if integrand is None else integrand(f.values)
    return f.grid.quad(g)


def inner_product(f: ComplexField, g: ComplexField) -> complex:
    """Discrete L^2 inner product <f, g> = int f conj(g)."""
    prod = f.values * np.conj(g.values)
    if isinstance(f.grid, RadialGrid):
        return complex(4.0 * np.pi * f.grid.h * np.sum(f.grid.r**2 * prod))
    return complex(f.grid.dx**3 * np.sum(prod))


def gradient_norm_sq(f: ComplexField) -> float:
    """Spectral evaluation of int |grad u|^2; equals -Re<Lap u, u> to round-off."""
    f.require_finite()
    grid = f.grid
    if isinstance(grid, RadialGrid):
        v = grid.r * f.values
        V = sfft.dst(v, type=1)
        lam = grid.laplacian_eigenvalues
        # Parseval: sum_j |v_j|^2 = (1/(2n)) sum_k |dst(v)_k|^2
        return float(4.0 * np.pi * grid.h / (2.0 * grid.n) * np.sum(lam * np.abs(V) ** 2))
    U = sfft.fftn(f.values)
    ksq = grid.k_sq()
    return float(grid.dx**3 / grid.m**3 * np.sum(ksq * np.abs(U) ** 2))


def apply_laplacian(f: ComplexField) -> ComplexField:
    """Spectral Laplacian, consistent with the integrator's transform."""
    f.require_finite()
    grid = f.grid
    if isinstance(grid, RadialGrid):
        v = grid.r * f.values
        V = sfft.dst(v, type=1)
        V *= -grid.laplacian_eigenvalues
        return ComplexField(grid, sfft.idst(V, type=1) / grid.r)
    U = sfft.fftn(f.values)
    return ComplexField(grid, sfft.ifftn(-grid.k_sq() * U))


def radial_derivative(f: ComplexField) -> np.ndarray:
    """du/dr on a radial grid, via the cosine series of v' (v = r*u)."""
    grid = f.grid
    if not isinstance(grid, RadialGrid):
        raise TypeError("radial_derivative needs a RadialGrid field")
    n = grid.n
    coeff = sfft.dst(grid.r * f.values, type=1) / n  # v = sum c_k sin(k pi r / L)
    k = np.arange(1, n)
    a = coeff * (k * np.pi / grid.r_max)
    # evaluate sum a_k cos(pi k j / n) at j = 1..n-1 through a DCT-I of length n+1
    pad = np.zeros(n + 1, dtype=a.dtype)
    pad[1:n] = 0.5 * a
    vprime = sfft.dct(pad, type=1)[1:n]
    return (vprime - f.values) / grid.r  # u' = v'/r - v/r^2


def axis_derivatives(f: ComplexField) -> list[np.ndarray]:
    """[du/dx, du/dy, du/dz] on a Cartesian grid (Nyquist mode zeroed)."""
    grid = f.grid
    if not isinstance(grid, CartesianGrid):
        raise TypeError("axis_derivatives needs a CartesianGrid field")
    kd = grid.k_axis.copy()
    if grid.m % 2 == 0:
        kd[grid.m // 2] = 0.0
    U = sfft.fftn(f.values)
    out = []
    for ax in range(3):
        shape = [1, 1, 1]
        shape[ax] = grid.m
        out.append(sfft.ifftn(1j * kd.reshape(shape) * U))
    return out


def sample_profile(grid: Grid, profile, center=None) -> ComplexField:
    """Pointwise evaluation of a radial profile, optionally translated.

    On a RadialGrid only center = origin is admitted.
    """
    if isinstance(grid, RadialGrid):
        if center is not None and np.linalg.norm(center) != 0.0:
            raise ValueError("nonzero center is not representable on a radial grid")
        return ComplexField(grid, np.asarray(profile(grid.r), dtype=np.complex128))
    c = np.zeros(3) if center is None else np.asarray(center, dtype=float)
    x, y, z = grid.meshgrid()
    rr = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2)
    return ComplexField(grid, np.asarray(profile(rr), dtype=np.complex128))


# ---------------------------------------------------------------------------
# snapshot files
# ---------------------------------------------------------------------------
# Layout (little-endian):
#   magic 'NLSF', u32 version = 1, u8 grid kind (1 radial, 2 cartesian),
#   3 pad bytes, f64 extent (r_max or l), u64 axis count (n or m),
#   u64 node count, f64 time stamp, then node_count interleaved re/im f64.

_MAGIC = b"NLSF"
_HEADER = struct.Struct("<4sIB3xdQQd")


def save_snapshot(path, f: ComplexField, time: float = 0.0) -> None:
    grid = f.grid
    if isinstance(grid, RadialGrid):
        kind, extent, count = 1, grid.r_max, grid.n
    else:
        kind, extent, count = 2, grid.l, grid.m
    flat = np.ascontiguousarray(f.values).ravel()
    inter = np.empty(2 * flat.size, dtype="<f8")
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, kind, extent, count, flat.size, time))
        fh.write(inter.tobytes())


def load_snapshot(path) -> tuple[ComplexField, float]:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, version, kind, extent, count, nodes, time = _HEADER.unpack(head)
        if magic != _MAGIC or version != 1:
            raise ValueError(f"not a field snapshot: {path}")
        raw = np.frombuffer(fh.read(16 * nodes), dtype="<f8")
    vals = raw[0::2] + 1j * raw[1::2]
    if kind == 1:
        grid: Grid = RadialGrid(r_max=extent, n=int(count))
        return ComplexField(grid, vals), time
    grid = CartesianGrid(l=extent, m=int(count))
    return ComplexField(grid, vals.reshape((grid.m,) * 3)), time
