"""Fields on the periodic slab T^2 x (0,1) with a uniform time grid.

Horizontal directions are periodic and handled by Fourier transforms;
the vertical direction z in (0,1) carries a sine or cosine basis chosen by a
per-component parity tag:

  * ``odd``     - sine series, value pinned to zero on both z-faces
                  (temperature, vertical velocity, xz/yz tensor slots)
  * ``even``    - cosine series, zero-slope extension across the faces
                  (horizontal velocity, pressure, diagonal tensor slots)
  * ``generic`` - no symmetry assumed; z-derivatives fall back to a 7-point
                  finite-difference matrix (used for antidivergence images,
                  whose tangential parts carry a flux through the faces)

Arrays are laid out ``(nt, nx, ny, nz + 1[, comp])``: x is axis 1, y axis 2,
z axis 3 with both face nodes stored, components last.  Time derivatives are
centered second order with one-sided closures at t = 0 and t = T; every
module reuses the helpers below so that composed operators cancel exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.fft import dct, dst, irfft, rfft

ODD = "odd"
EVEN = "even"
GENERIC = "generic"

VECTOR_PARITY = (EVEN, EVEN, ODD)
TENSOR_COMPS = ("xx", "yy", "xy", "xz", "yz")
TENSOR_PARITY = (EVEN, EVEN, EVEN, ODD, ODD)

_FLIP = {ODD: EVEN, EVEN: ODD, GENERIC: GENERIC}


class DomainError(ValueError):
    """Input outside the documented domain (non-finite data, bad sizes)."""


class ParityError(ValueError):
    """Operation incompatible with a field's declared z-parity."""


class ContractError(ValueError):
    """Arguments violate an interface precondition."""


def fd_weights(x0: float, xs: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``x0``.

    Fornberg's recursion on arbitrary nodes ``xs``; exact for polynomials of
    degree ``len(xs) - 1``.
    """
    n = len(xs)
    w = np.zeros((order + 1, n))
    w[0, 0] = 1.0
    c1 = 1.0
    c4 = xs[0] - x0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    w[k, i] = c1 * (k * w[k - 1, i - 1] - c5 * w[k, i - 1]) / c2
                w[0, i] = -c1 * c5 * w[0, i - 1] / c2
            for k in range(mn, 0, -1):
                w[k, j] = ((xs[i] - x0) * w[k, j] - k * w[k - 1, j]) / c3
            w[0, j] = (xs[i] - x0) * w[0, j] / c3
        c1 = c2
    return w[order]


class Grid:
    """Uniform tensor grid: nx x ny cells on the torus, nz cells in z, nt times.

    z-nodes include both faces (nz + 1 samples).  Instances carry lazily
    built derivative symbols and solver caches keyed to the resolution, so
    share one Grid per configuration.
    """

    def __init__(self, nx: int, ny: int, nz: int, nt: int, T: float,
                 Lx: float = 1.0, Ly: float = 1.0):
        for name, n in (("nx", nx), ("ny", ny), ("nz", nz)):
            if n < 4 or n % 2:
                raise DomainError(f"{name} must be even and >= 4, got {n}")
        if nt < 1:
            raise DomainError(f"nt must be >= 1, got {nt}")
        if not (T > 0 and Lx > 0 and Ly > 0):
            raise DomainError("T, Lx, Ly must be positive")
        self.nx, self.ny, self.nz, self.nt = nx, ny, nz, nt
        self.T, self.Lx, self.Ly = float(T), float(Lx), float(Ly)
        self.x = np.arange(nx) * (self.Lx / nx)
        self.y = np.arange(ny) * (self.Ly / ny)
        self.z = np.arange(nz + 1) / nz
        self.t = np.linspace(0.0, self.T, nt) if nt > 1 else np.zeros(1)
        self.dt = self.T / (nt - 1) if nt > 1 else self.T
        self.hx, self.hy, self.hz = self.Lx / nx, self.Ly / ny, 1.0 / nz
        # odd-derivative symbols with the Nyquist mode zeroed
        kx = 2.0 * np.pi * np.fft.fftfreq(nx, d=self.hx)
        ky = 2.0 * np.pi * np.fft.rfftfreq(ny, d=self.hy)
        kx[nx // 2] = 0.0
        ky[-1] = 0.0
        self.kx, self.ky = kx, ky
        self.kz = np.pi * np.arange(nz + 1)  # vertical mode k -> k*pi
        self._dz_matrix = None
        self.caches: dict = {}

    def __eq__(self, other):
        return isinstance(other, Grid) and self.shape == other.shape and (
            self.T, self.Lx, self.Ly) == (other.T, other.Lx, other.Ly)

    def __hash__(self):
        return hash((self.shape, self.T, self.Lx, self.Ly))

    @property
    def shape(self):
        return (self.nt, self.nx, self.ny, self.nz + 1)

    @property
    def cell_volume(self):
        return self.Lx * self.Ly

    def dz_matrix(self) -> np.ndarray:
        """7-point 6th-order first-derivative matrix on the z-nodes."""
        if self._dz_matrix is None:
            m = self.nz + 1
            D = np.zeros((m, m))
            width = min(7, m)
            for i in range(m):
                j0 = min(max(i - width // 2, 0), m - width)
                D[i, j0:j0 + width] = fd_weights(self.z[i], self.z[j0:j0 + width], 1)
            self._dz_matrix = D
        return self._dz_matrix

    def slice_grid(self) -> "Grid":
        """Same spatial grid with a single time sample."""
        if self.nt == 1:
            return self
        g = self.caches.get("slice_grid")
        if g is None:
            g = Grid(self.nx, self.ny, self.nz, 1, self.T, self.Lx, self.Ly)
            self.caches["slice_grid"] = g
        return g


# ---------------------------------------------------------------------------
# raw-array derivative kernels (arrays shaped (nt, nx, ny, nz+1))

def deriv_x(arr: np.ndarray, grid: Grid) -> np.ndarray:
    spec = rfft(arr, axis=1)
    kx = grid.kx[:grid.nx // 2 + 1].copy()
    spec *= (1j * kx)[None, :, None, None]
    return irfft(spec, n=grid.nx, axis=1)


def deriv_y(arr: np.ndarray, grid: Grid) -> np.ndarray:
    spec = rfft(arr, axis=2)
    spec *= (1j * grid.ky)[None, None, :, None]
    return irfft(spec, n=grid.ny, axis=2)


def sine_coeffs(arr: np.ndarray, grid: Grid) -> np.ndarray:
    """Sine-series coefficients b_k (k = 1..nz-1) from node values."""
    return dst(arr[..., 1:-1], type=1, axis=-1) / grid.nz


def sine_values(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    out = np.zeros(coeffs.shape[:-1] + (grid.nz + 1,))
    out[..., 1:-1] = dst(coeffs, type=1, axis=-1) / 2.0
    return out


def cos_coeffs(arr: np.ndarray, grid: Grid) -> np.ndarray:
    """Cosine-series coefficients c_k (k = 0..nz) from node values."""
    c = dct(arr, type=1, axis=-1) / grid.nz
    c[..., 0] /= 2.0
    c[..., -1] /= 2.0
    return c


def cos_values(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    c = coeffs.copy()
    c[..., 0] *= 2.0
    c[..., -1] *= 2.0
    return dct(c, type=1, axis=-1) / 2.0


def deriv_z_odd(arr: np.ndarray, grid: Grid) -> np.ndarray:
    """d/dz of a sine-parity field; result has cosine parity."""
    b = sine_coeffs(arr, grid)
    c = np.zeros(arr.shape[:-1] + (grid.nz + 1,))
    c[..., 1:-1] = b * grid.kz[1:-1]
    return cos_values(c, grid)


def deriv_z_even(arr: np.ndarray, grid: Grid) -> np.ndarray:
    """d/dz of a cosine-parity field; result has sine parity.

    The cosine Nyquist mode differentiates to a sine mode invisible on the
    nodes and is dropped, mirroring the horizontal Nyquist convention.
    """
    c = cos_coeffs(arr, grid)
    b = -c[..., 1:-1] * grid.kz[1:-1]
    return sine_values(b, grid)


def deriv_z_generic(arr: np.ndarray, grid: Grid) -> np.ndarray:
    D = grid.dz_matrix()
    return np.einsum("ij,...j->...i", D, arr)


def deriv_z(arr: np.ndarray, grid: Grid, parity: str) -> np.ndarray:
    if parity == ODD:
        return deriv_z_odd(arr, grid)
    if parity == EVEN:
        return deriv_z_even(arr, grid)
    if parity == GENERIC:
        return deriv_z_generic(arr, grid)
    raise ParityError(f"unknown z-parity {parity!r}")


def deriv_t(arr: np.ndarray, grid: Grid) -> np.ndarray:
    """Centered-in-time derivative with 2nd-order one-sided end rows."""
    if grid.nt < 3:
        raise ContractError("time derivative needs nt >= 3")
    dt = grid.dt
    out = np.empty_like(arr)
    out[1:-1] = (arr[2:] - arr[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * arr[0] + 4.0 * arr[1] - arr[2]) / (2.0 * dt)
    out[-1] = (3.0 * arr[-1] - 4.0 * arr[-2] + arr[-3]) / (2.0 * dt)
    return out


# ---------------------------------------------------------------------------
# field containers

class _Field:
    ncomp = 1

    def __init__(self, grid: Grid, data: np.ndarray, zparity):
        data = np.asarray(data, dtype=float)
        want = grid.shape + ((self.ncomp,) if self.ncomp > 1 else ())
        if data.shape != want:
            raise DomainError(f"data shape {data.shape} != expected {want}")
        if not np.all(np.isfinite(data)):
            raise DomainError("field data must be finite")
        self.grid = grid
        self.data = data
        self.zparity = zparity

    def copy(self):
        return type(self)(self.grid, self.data.copy(), self.zparity)

    def __add__(self, other):
        self._check_mate(other)
        return type(self)(self.grid, self.data + other.data, self.zparity)

    def __sub__(self, other):
        self._check_mate(other)
        return type(self)(self.grid, self.data - other.data, self.zparity)

    def __mul__(self, a):
        return type(self)(self.grid, self.data * float(a), self.zparity)

    __rmul__ = __mul__

    def _check_mate(self, other):
        if type(other) is not type(self) or other.grid != self.grid:
            raise ContractError("field mismatch (type or grid)")
        if other.zparity != self.zparity:
            raise ParityError("z-parity mismatch")


class ScalarField(_Field):
    def __init__(self, grid, data, zparity=EVEN):
        if zparity not in (ODD, EVEN, GENERIC):
            raise ParityError(f"unknown z-parity {zparity!r}")
        super().__init__(grid, data, zparity)

    @classmethod
    def zeros(cls, grid, zparity=EVEN):
        return cls(grid, np.zeros(grid.shape), zparity)

    @classmethod
    def from_function(cls, grid, fn: Callable, zparity=EVEN):
        """Sample fn(t, x, y, z) on the grid (broadcasting arguments)."""
        t = grid.t[:, None, None, None]
        x = grid.x[None, :, None, None]
        y = grid.y[None, None, :, None]
        z = grid.z[None, None, None, :]
        data = np.broadcast_to(fn(t, x, y, z), grid.shape).astype(float)
        return cls(grid, data.copy(), zparity)


class VectorField(_Field):
    ncomp = 3

    def __init__(self, grid, data, zparity=VECTOR_PARITY):
        zparity = tuple(zparity)
        if len(zparity) != 3:
            raise ParityError("vector fields need three parity tags")
        super().__init__(grid, data, zparity)

    @classmethod
    def zeros(cls, grid, zparity=VECTOR_PARITY):
        return cls(grid, np.zeros(grid.shape + (3,)), zparity)

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.data[..., i].copy(), self.zparity[i])


class TensorField(_Field):
    """Symmetric traceless 3x3 field; stores xx, yy, xy, xz, yz (zz implied)."""

    ncomp = 5

    def __init__(self, grid, data, zparity=TENSOR_PARITY):
        zparity = tuple(zparity)
        if len(zparity) != 5:
            raise ParityError("tensor fields need five parity tags")
        super().__init__(grid, data, zparity)

    @classmethod
    def zeros(cls, grid, zparity=TENSOR_PARITY):
        return cls(grid, np.zeros(grid.shape + (5,)), zparity)

    @property
    def zz(self) -> np.ndarray:
        return -self.data[..., 0] - self.data[..., 1]

    def sym6(self) -> np.ndarray:
        """Entries reordered to (xx, yy, zz, xy, xz, yz) for the eigensolvers."""
        d = self.data
        return np.stack([d[..., 0], d[..., 1], self.zz,
                         d[..., 2], d[..., 3], d[..., 4]], axis=-1)


def slice_field(f, k: int):
    """Extract time slice k as a single-time field on the shared slice grid."""
    g = f.grid.slice_grid()
    return type(f)(g, f.data[k:k + 1].copy(), f.zparity)


# ---------------------------------------------------------------------------
# differential operators

def derivative(f: ScalarField, axis: str) -> ScalarField:
    """Spectral derivative in x, y, z (per declared parity) or t."""
    if axis == "x":
        return ScalarField(f.grid, deriv_x(f.data, f.grid), f.zparity)
    if axis == "y":
        return ScalarField(f.grid, deriv_y(f.data, f.grid), f.zparity)
    if axis == "z":
        return ScalarField(f.grid, deriv_z(f.data, f.grid, f.zparity),
                           _FLIP[f.zparity])
    if axis == "t":
        return ScalarField(f.grid, deriv_t(f.data, f.grid), f.zparity)
    raise ContractError(f"axis must be one of x, y, z, t; got {axis!r}")


def gradient(f: ScalarField) -> VectorField:
    g = f.grid
    out = np.stack([deriv_x(f.data, g), deriv_y(f.data, g),
                    deriv_z(f.data, g, f.zparity)], axis=-1)
    return VectorField(g, out, (f.zparity, f.zparity, _FLIP[f.zparity]))


def divergence(f):
    """Divergence of a vector (-> scalar) or symmetric tensor (-> vector)."""
    g = f.grid
    if isinstance(f, VectorField):
        d = (deriv_x(f.data[..., 0], g) + deriv_y(f.data[..., 1], g)
             + deriv_z(f.data[..., 2], g, f.zparity[2]))
        parities = {_FLIP[f.zparity[2]], f.zparity[0], f.zparity[1]}
        return ScalarField(g, d, parities.pop() if len(parities) == 1 else GENERIC)
    if isinstance(f, TensorField):
        xx, yy, xy, xz, yz = (f.data[..., i] for i in range(5))
        rows = np.stack([
            deriv_x(xx, g) + deriv_y(xy, g) + deriv_z(xz, g, f.zparity[3]),
            deriv_x(xy, g) + deriv_y(yy, g) + deriv_z(yz, g, f.zparity[4]),
            deriv_x(xz, g) + deriv_y(yz, g) + deriv_z(f.zz, g, f.zparity[0]),
        ], axis=-1)
        if f.zparity == TENSOR_PARITY:
            parity = VECTOR_PARITY
        else:
            parity = (GENERIC, GENERIC, GENERIC)
        return VectorField(g, rows, parity)
    raise ContractError("divergence expects a VectorField or TensorField")


def traceless_outer(u: VectorField) -> TensorField:
    """u (x) u - |u|^2/3 I, stored in the five-slot layout."""
    d = u.data
    n2 = (d * d).sum(axis=-1) / 3.0
    comps = np.stack([d[..., 0] * d[..., 0] - n2,
                      d[..., 1] * d[..., 1] - n2,
                      d[..., 0] * d[..., 1],
                      d[..., 0] * d[..., 2],
                      d[..., 1] * d[..., 2]], axis=-1)
    return TensorField(u.grid, comps)


def _poisson_even(rhs: np.ndarray, grid: Grid) -> np.ndarray:
    """Solve laplace(phi) = rhs for a cosine-parity phi, zero-mean gauge.

    Uses the symbols of the composed discrete operators, so the projection
    residual measured with the same derivatives vanishes on every reachable
    mode; unreachable degenerate modes (global mean and bare horizontal
    Nyquist lines) are annihilated.
    """
    spec = np.fft.fft(rfft(rhs, axis=2), axis=1)
    c = cos_coeffs(spec.real, grid) + 1j * cos_coeffs(spec.imag, grid)
    kx = grid.kx[:, None, None]
    ky = grid.ky[None, :, None]
    kz2 = (grid.kz ** 2).copy()
    kz2[-1] = 0.0  # cosine Nyquist differentiates to an invisible sine mode
    den = kx ** 2 + ky ** 2 + kz2[None, None, :]
    phi = np.zeros_like(c)
    mask = den > 0
    phi[..., mask] = -c[..., mask] / den[None, mask]
    vals = cos_values(phi.real, grid) + 1j * cos_values(phi.imag, grid)
    return irfft(np.fft.ifft(vals, axis=1), n=grid.ny, axis=2)


def project_div_free(u: VectorField) -> VectorField:
    """Remove the gradient part of u (normal-flow preserving Leray step)."""
    if u.zparity != VECTOR_PARITY:
        raise ParityError("projection expects the canonical velocity parity")
    g = u.grid
    d = divergence(u)
    phi = _poisson_even(d.data, g)
    corr = np.stack([deriv_x(phi, g), deriv_y(phi, g),
                     deriv_z_even(phi, g)], axis=-1)
    return VectorField(g, u.data - corr, u.zparity)


# ---------------------------------------------------------------------------
# quadrature

def _z_weights(grid: Grid) -> np.ndarray:
    w = np.full(grid.nz + 1, grid.hz)
    w[0] = w[-1] = grid.hz / 2.0
    return w


def integrate(f: ScalarField, k: int | None = None):
    """Integral over the slab per time slice (float for one k, else array).

    Horizontal directions use the exact periodic rectangle rule; z uses the
    trapezoid rule on the face-inclusive nodes.
    """
    w = _z_weights(f.grid)
    vals = (f.data * w).sum(axis=3).mean(axis=(1, 2)) * f.grid.cell_volume
    if k is None:
        return vals
    return float(vals[k])


def integrate_array(arr: np.ndarray, grid: Grid) -> np.ndarray:
    w = _z_weights(grid)
    return (arr * w).sum(axis=3).mean(axis=(1, 2)) * grid.cell_volume


def l2_norm(f) -> float:
    """Space-time L2 norm (trapezoid in t and z, exact mean in x, y)."""
    sq = f.data ** 2
    if sq.ndim == 5:
        sq = sq.sum(axis=-1)
    per_t = integrate_array(sq, f.grid)
    if f.grid.nt == 1:
        return math.sqrt(float(per_t[0]))
    wt = np.full(f.grid.nt, f.grid.dt)
    wt[0] = wt[-1] = f.grid.dt / 2.0
    return math.sqrt(float((per_t * wt).sum()))


def random_smooth_vector(grid: Grid, seed: int, amplitude: float = 1.0,
                         modes: int = 3, steady: bool = False) -> VectorField:
    """Seeded band-limited divergence-free velocity sample (no-flow in z)."""
    rng = np.random.default_rng(seed)
    t = grid.t[:, None, None, None] / grid.T if grid.nt > 1 else np.zeros((1, 1, 1, 1))
    x = grid.x[None, :, None, None] * (2 * np.pi / grid.Lx)
    y = grid.y[None, None, :, None] * (2 * np.pi / grid.Ly)
    z = grid.z[None, None, None, :] * np.pi
    data = np.zeros(grid.shape + (3,))
    for _ in range(modes):
        mx, my = rng.integers(-2, 3, size=2)
        mz = rng.integers(1, 3)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.normal(size=3) * amplitude / modes
        env = 1.0 if steady else (0.5 + 0.5 * np.cos(np.pi * t * rng.uniform(0.5, 2)))
        horiz = np.cos(mx * x + my * y + phase)
        data[..., 0] += amp[0] * horiz * np.cos(mz * z) * env
        data[..., 1] += amp[1] * horiz * np.cos(mz * z) * env
        data[..., 2] += amp[2] * np.sin(mx * x + my * y + phase) * np.sin(mz * z) * env
    return project_div_free(VectorField(grid, data))


def horizontal_stream_vector(grid: Grid, seed: int, amplitude: float = 1.0,
                             modes: int = 3) -> VectorField:
    """Seeded z-independent horizontal velocity from a periodic streamfunction.

    Divergence-free under the spectral and the finite-difference vertical
    derivative alike (the third component is zero and the others do not vary
    in z), which makes it safe initial data for generically tagged states.
    Rescaled so the sup norm equals amplitude.
    """
    rng = np.random.default_rng(seed)
    x = grid.x[None, :, None, None]
    y = grid.y[None, None, :, None]
    psi = np.zeros((1, grid.nx, grid.ny, 1))
    for _ in range(modes):
        mx, my = rng.integers(-2, 3, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.normal()
        psi = psi + amp * np.cos(
            2 * np.pi * (mx * x / grid.Lx + my * y / grid.Ly) + phase)
    psi = np.broadcast_to(psi, grid.shape).copy()
    data = np.zeros(grid.shape + (3,))
    data[..., 0] = deriv_y(psi, grid)
    data[..., 1] = -deriv_x(psi, grid)
    top = np.sqrt((data ** 2).sum(axis=-1)).max()
    if top > 0.0:
        data *= amplitude / top
    return VectorField(grid, data, (GENERIC, GENERIC, GENERIC))
