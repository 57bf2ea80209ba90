"""Dirichlet solver for the vector Lame system and the antidivergence map.

The operator is div D0(v) with D0(v) = grad v + (grad v)^T - (2/3)(div v) I,
which expands to Delta v + (1/3) grad(div v).  Horizontal Fourier modes
decouple, leaving one coupled three-component boundary problem in z per mode;
each is assembled from the same primitive derivative symbols the field layer
uses (spectral multipliers in x, y and the shared 7-point matrix in z), so
applying the field-layer divergence to D0 of the solution reproduces the
right-hand side on interior nodes to rounding accuracy.  Face rows carry the
homogeneous Dirichlet condition instead of the equation; reported residuals
therefore live on interior nodes.

Factorizations are cached on the grid; solving many time slices against the
same grid reuses them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import irfft, rfft
from scipy.linalg import lu_factor, lu_solve

from .fields import (ContractError, DomainError, GENERIC, Grid, TensorField,
                     VectorField, TENSOR_PARITY, VECTOR_PARITY,
                     deriv_x, deriv_y, deriv_z, divergence)


class SolverError(RuntimeError):
    """Direct solve failed to meet the requested residual."""

    def __init__(self, message: str, residual_history):
        super().__init__(message)
        self.residual_history = list(residual_history)


@dataclass
class LameSolution:
    v: VectorField
    residual_norm: float
    history: list = field(default_factory=list)


def d0(v: VectorField) -> TensorField:
    """Traceless symmetric deformation grad v + (grad v)^T - (2/3)(div v) I."""
    g = v.grid
    comps = [v.data[..., i] for i in range(3)]
    div = (deriv_x(comps[0], g) + deriv_y(comps[1], g)
           + deriv_z(comps[2], g, v.zparity[2]))
    xx = 2.0 * deriv_x(comps[0], g) - (2.0 / 3.0) * div
    yy = 2.0 * deriv_y(comps[1], g) - (2.0 / 3.0) * div
    xy = deriv_x(comps[1], g) + deriv_y(comps[0], g)
    xz = deriv_x(comps[2], g) + deriv_z(comps[0], g, v.zparity[0])
    yz = deriv_y(comps[2], g) + deriv_z(comps[1], g, v.zparity[1])
    data = np.stack([xx, yy, xy, xz, yz], axis=-1)
    parity = TENSOR_PARITY if v.zparity == VECTOR_PARITY else (GENERIC,) * 5
    return TensorField(g, data, parity)


def lame_apply(v: VectorField) -> VectorField:
    """div D0(v), evaluated with the shared discrete operators."""
    return divergence(d0(v))


def _factorizations(grid: Grid):
    cache = grid.caches.get("lame_lu")
    if cache is not None:
        return cache
    m = grid.nz + 1
    eye = np.eye(m)
    Dz = grid.dz_matrix()
    Dzz = Dz @ Dz
    kxs = grid.kx
    kys = grid.ky
    interior = np.ones(3 * m, dtype=bool)
    for c in range(3):
        interior[c * m] = False
        interior[c * m + m - 1] = False
    cache = {}
    M = np.empty((3 * m, 3 * m), dtype=complex)
    for ix, a in enumerate(kxs):
        for iy, b in enumerate(kys):
            lap = Dzz - (a * a + b * b) * eye
            M[:] = 0.0
            M[0:m, 0:m] = lap - (a * a / 3.0) * eye
            M[0:m, m:2 * m] = -(a * b / 3.0) * eye
            M[0:m, 2 * m:] = (1j * a / 3.0) * Dz
            M[m:2 * m, 0:m] = -(a * b / 3.0) * eye
            M[m:2 * m, m:2 * m] = lap - (b * b / 3.0) * eye
            M[m:2 * m, 2 * m:] = (1j * b / 3.0) * Dz
            M[2 * m:, 0:m] = (1j * a / 3.0) * Dz
            M[2 * m:, m:2 * m] = (1j * b / 3.0) * Dz
            M[2 * m:, 2 * m:] = lap + Dzz / 3.0
            M[~interior, :] = 0.0
            M[~interior, ~interior] = 1.0
            cache[(ix, iy)] = lu_factor(M)
    grid.caches["lame_lu"] = (cache, interior)
    return grid.caches["lame_lu"]


def solve_lame(g: VectorField, tol: float = 1e-8) -> LameSolution:
    """Solve div D0(v) = g with v = 0 on the z-faces.

    g may carry one time slice or a whole trajectory; slices solve
    independently.  The relative interior residual is measured with the
    field-layer divergence and must come out below tol.
    """
    if not (0.0 < tol <= 1e-4):
        raise ContractError(f"tol must lie in (0, 1e-4], got {tol}")
    grid = g.grid
    m = grid.nz + 1
    cache, interior = _factorizations(grid)
    spec = np.fft.fft(rfft(g.data, axis=2), axis=1)
    # stack components along z-major vectors: (nt, 3m) per mode
    rhs_all = np.concatenate([spec[..., 0], spec[..., 1], spec[..., 2]],
                             axis=-1)
    sol = np.empty_like(rhs_all)
    for (ix, iy), lu in cache.items():
        rhs = rhs_all[:, ix, iy, :].copy()
        rhs[:, ~interior] = 0.0
        sol[:, ix, iy, :] = lu_solve(lu, rhs.T).T
    vhat = np.stack([sol[..., 0:m], sol[..., m:2 * m], sol[..., 2 * m:]],
                    axis=-1)
    vdata = irfft(np.fft.ifft(vhat, axis=1), n=grid.ny, axis=2)
    v = VectorField(grid, vdata, (GENERIC, GENERIC, GENERIC))

    gnorm = float(np.linalg.norm(g.data[:, :, :, 1:-1, :]))
    if gnorm == 0.0:
        return LameSolution(v=v, residual_norm=0.0)
    res = lame_apply(v).data - g.data
    rel = float(np.linalg.norm(res[:, :, :, 1:-1, :])) / gnorm
    if rel > tol:
        raise SolverError(
            f"interior residual {rel:.3e} exceeds tol {tol:.3e}", [rel])
    return LameSolution(v=v, residual_norm=rel, history=[rel])


def to_sym_potential(g: VectorField, tol: float = 1e-8) -> TensorField:
    """Traceless symmetric G with div G = g on interior nodes (antidivergence)."""
    return d0(solve_lame(g, tol).v)


def coefficient_tensor() -> np.ndarray:
    """A[alpha, beta, i, j]: coefficient of d_alpha d_beta v_j in row i."""
    d = np.eye(3)
    A = (np.einsum("ab,ij->abij", d, d)
         + np.einsum("aj,bi->abij", d, d)
         - (2.0 / 3.0) * np.einsum("ai,bj->abij", d, d))
    return A


def legendre_hadamard_form(xi, eta) -> float:
    """Quadratic form of the operator symbol on the pair (xi, eta).

    Contracts the assembled coefficient tensor; ellipticity means this is
    bounded below by |xi|^2 |eta|^2.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if xi.shape != (3,) or eta.shape != (3,):
        raise DomainError("xi and eta must be 3-vectors")
    return float(np.einsum("abij,a,b,i,j->", coefficient_tensor(),
                           xi, xi, eta, eta))
