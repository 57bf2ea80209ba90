"""Model assembly for the two rotating-flow closures.

Both closures share one shape: a forcing tensor H obtained by inverting the
elliptic operator of :mod:`wildflow.lame` against a kind-specific right-hand
side built from the Coriolis term and the transported temperature, plus a
scalar trace Pi that enters the target energy density

    ebar = (3/2) (Z(t) - Pi[u]).

The buoyant kind carries Pi = (2/3) z Theta[u]; the hydrostatic kind folds
the temperature into a pressure completion with Pi = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import heat, lame
from .fields import (
    EVEN,
    GENERIC,
    ODD,
    ContractError,
    DomainError,
    Grid,
    ScalarField,
    TensorField,
    VectorField,
    cos_values,
    deriv_x,
    deriv_y,
    deriv_z_odd,
    sine_coeffs,
)

_KINDS = {
    "boussinesq": "boussinesq",
    "primitive": "primitive",
    "extendedprimitive": "primitive",
    "extended primitive": "primitive",
}


@dataclass
class SystemSpec:
    """Closure parameters for one model kind.

    omega is a constant rotation vector or a steady VectorField; Z is a
    constant or a function of time, defaulting to pi_bar + cz_margin once
    pi_bound has run.  p_surface(t, x, y) only matters for the hydrostatic
    kind and defaults to zero.
    """

    kind: str
    omega: Union[np.ndarray, VectorField] = (0.0, 0.0, 0.0)
    lambda1: float = 1.0
    lambda2: float = 1.0
    theta0: Optional[ScalarField] = None
    p_surface: Optional[Callable] = None
    Z: Union[float, Callable, None] = None
    cz_margin: float = 1.0
    pi_bar: Optional[float] = None

    def __post_init__(self):
        key = str(self.kind).strip().lower().replace("-", " ").replace("_", " ")
        key = " ".join(key.split())
        if key.replace(" ", "") in _KINDS:
            self.kind = _KINDS[key.replace(" ", "")]
        else:
            raise DomainError(f"unknown system kind {self.kind!r}")
        if not isinstance(self.omega, VectorField):
            om = np.asarray(self.omega, dtype=float)
            if om.shape != (3,) or not np.all(np.isfinite(om)):
                raise DomainError("omega must be a finite 3-vector or a VectorField")
            self.omega = om
        if self.lambda1 <= 0 or self.lambda2 <= 0:
            raise DomainError("diffusivities must be positive")
        if self.cz_margin <= 0:
            raise DomainError("cz_margin must be positive")
        if self.theta0 is not None and not isinstance(self.theta0, ScalarField):
            raise DomainError("theta0 must be a ScalarField or None")


def _require_kind(spec: SystemSpec, kind: str, op: str) -> None:
    if spec.kind != kind:
        raise ContractError(f"{op} requires a {kind} spec, got {spec.kind}")


def pi_bound(spec: SystemSpec) -> float:
    """Worst-case |Pi| over the admissible class; stored into spec.pi_bar.

    The buoyant bound is (2/3) sup |z theta0|; the sup is taken over the
    sine-series evaluation of theta0 on a fine vertical grid, so it does not
    depend on how coarsely theta0 was sampled.
    """
    if spec.kind == "primitive" or spec.theta0 is None:
        spec.pi_bar = 0.0
        return 0.0
    th = spec.theta0
    g = th.grid
    b = sine_coeffs(th.data, g)
    k = np.arange(1, g.nz)
    zf = np.linspace(0.0, 1.0, 4097)
    basis = np.sin(np.pi * k[:, None] * zf[None, :])
    vals = np.tensordot(b, basis, axes=([-1], [0]))
    prof = np.abs(vals * zf)
    idx = np.unravel_index(prof.argmax(), prof.shape)
    best = prof[idx]
    j = idx[-1]
    if 0 < j < zf.size - 1:
        # parabolic peak refinement between scan nodes
        fm = prof[idx[:-1] + (j - 1,)]
        fp = prof[idx[:-1] + (j + 1,)]
        denom = fm - 2.0 * best + fp
        if denom < 0.0:
            s = 0.5 * (fm - fp) / denom
            best = best - 0.25 * (fm - fp) * s
    spec.pi_bar = (2.0 / 3.0) * float(best)
    return spec.pi_bar


def z_values(spec: SystemSpec, grid: Grid) -> np.ndarray:
    """Z(t) sampled on the grid times, finalizing the default constant."""
    if spec.Z is None:
        if spec.pi_bar is None:
            pi_bound(spec)
        spec.Z = spec.pi_bar + spec.cz_margin
    if callable(spec.Z):
        z = np.array([float(spec.Z(t)) for t in grid.t])
    else:
        z = np.full(grid.nt, float(spec.Z))
    if not np.all(np.isfinite(z)):
        raise DomainError("Z(t) must be finite on the grid times")
    if spec.pi_bar is not None and z.max() <= spec.pi_bar:
        raise ContractError(
            f"sup Z = {z.max():.6g} must exceed the pressure bound "
            f"pi_bar = {spec.pi_bar:.6g}")
    return z


def theta_of(u: VectorField, spec: SystemSpec) -> ScalarField:
    """Temperature transported by u from spec.theta0 (zero fast path)."""
    if spec.theta0 is None or np.abs(spec.theta0.data).max() == 0.0:
        return ScalarField(u.grid, np.zeros(u.grid.shape), ODD)
    run = heat.solve_advdiff(u, spec.theta0, spec.lambda1, spec.lambda2)
    return run.theta


def pi_bous(u: VectorField, spec: SystemSpec, theta: Optional[ScalarField] = None
            ) -> ScalarField:
    """Pressure trace (2/3) z Theta[u] of the buoyant kind."""
    _require_kind(spec, "boussinesq", "pi_bous")
    th = theta if theta is not None else theta_of(u, spec)
    data = (2.0 / 3.0) * u.grid.z * th.data
    return ScalarField(u.grid, data, GENERIC)


def pi_of(u: VectorField, spec: SystemSpec, theta: Optional[ScalarField] = None
          ) -> ScalarField:
    """Kind-generic pressure trace (identically zero for the hydrostatic kind)."""
    if spec.kind == "boussinesq":
        return pi_bous(u, spec, theta=theta)
    return ScalarField(u.grid, np.zeros(u.grid.shape), GENERIC)


def _coriolis_term(u: VectorField, spec: SystemSpec) -> np.ndarray:
    om = spec.omega
    if isinstance(om, VectorField):
        if om.grid.shape[1:] != u.grid.shape[1:]:
            raise ContractError("omega grid does not match the velocity grid")
        om = om.data
    return np.cross(om, u.data)


def _solve_h(grid: Grid, rhs: np.ndarray, tol: float) -> TensorField:
    if np.abs(rhs).max() == 0.0:
        return TensorField.zeros(grid, (GENERIC,) * 5)
    g = VectorField(grid, rhs, (GENERIC, GENERIC, GENERIC))
    return lame.to_sym_potential(g, tol)


def h_bous(u: VectorField, spec: SystemSpec, theta: Optional[ScalarField] = None,
           tol: float = 1e-8) -> TensorField:
    """Forcing tensor of the buoyant kind: div H = Omega x u + buoyancy - grad Pi."""
    _require_kind(spec, "boussinesq", "h_bous")
    grid = u.grid
    th = theta if theta is not None else theta_of(u, spec)
    rhs = _coriolis_term(u, spec)
    rhs[..., 2] += th.data
    # grad((2/3) z Theta) via the product rule: the z factor breaks the sine
    # parity, so the vertical slot carries Theta + z dTheta/dz
    tx = deriv_x(th.data, grid)
    ty = deriv_y(th.data, grid)
    tz = deriv_z_odd(th.data, grid)
    z = grid.z
    rhs[..., 0] -= (2.0 / 3.0) * z * tx
    rhs[..., 1] -= (2.0 / 3.0) * z * ty
    rhs[..., 2] -= (2.0 / 3.0) * (th.data + z * tz)
    return _solve_h(grid, rhs, tol)


def gamma_prim(u: VectorField, spec: SystemSpec,
               theta: Optional[ScalarField] = None) -> ScalarField:
    """Hydrostatic pressure completion P(t,x,y) - int_0^z Theta[u].

    The vertical antiderivative is taken at the sine-coefficient level, so
    d(gamma)/dz = -Theta holds exactly on resolved modes.
    """
    _require_kind(spec, "primitive", "gamma_prim")
    grid = u.grid
    th = theta if theta is not None else theta_of(u, spec)
    b = sine_coeffs(th.data, grid)
    k = np.arange(1, grid.nz)
    over = b / (np.pi * k)
    c = np.zeros(grid.shape)
    c[..., 0] = over.sum(axis=-1)
    c[..., 1:grid.nz] = -over
    data = -cos_values(c, grid)
    if spec.p_surface is not None:
        t = grid.t[:, None, None]
        x = grid.x[None, :, None]
        y = grid.y[None, None, :]
        surf = np.broadcast_to(np.asarray(spec.p_surface(t, x, y), dtype=float),
                               grid.shape[:3])
        data = data + surf[..., None]
    return ScalarField(grid, data, EVEN)


def h_prim(u: VectorField, spec: SystemSpec, theta: Optional[ScalarField] = None,
           tol: float = 1e-8) -> TensorField:
    """Forcing tensor of the hydrostatic kind: div H = Omega x u + grad gamma."""
    _require_kind(spec, "primitive", "h_prim")
    grid = u.grid
    th = theta if theta is not None else theta_of(u, spec)
    gam = gamma_prim(u, spec, theta=th)
    rhs = _coriolis_term(u, spec)
    rhs[..., 0] += deriv_x(gam.data, grid)
    rhs[..., 1] += deriv_y(gam.data, grid)
    rhs[..., 2] -= th.data
    return _solve_h(grid, rhs, tol)


def h_of(u: VectorField, spec: SystemSpec, theta: Optional[ScalarField] = None,
         tol: float = 1e-8) -> TensorField:
    """Kind-generic forcing tensor."""
    if spec.kind == "boussinesq":
        return h_bous(u, spec, theta=theta, tol=tol)
    return h_prim(u, spec, theta=theta, tol=tol)


def ebar(u: VectorField, spec: SystemSpec, theta: Optional[ScalarField] = None
         ) -> ScalarField:
    """Target energy density (3/2)(Z(t) - Pi[u])."""
    grid = u.grid
    z = z_values(spec, grid)
    pi = pi_of(u, spec, theta=theta)
    data = 1.5 * (z[:, None, None, None] - pi.data)
    return ScalarField(grid, data, GENERIC)
