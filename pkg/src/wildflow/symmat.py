"""Closed-form spectral helpers for stacked symmetric 3x3 matrices.

Matrices are packed as six entries ``(xx, yy, zz, xy, xz, yz)`` in the last
axis.  Eigenvalues come from the trigonometric solution of the depressed
characteristic cubic, which vectorizes over arbitrarily many points and is
orders of magnitude faster than a dense solver loop; the admissibility
bounds and amplitude searches evaluate it on every grid point of every
candidate state, so this path is hot.
"""

from __future__ import annotations

import numpy as np

from .fields import ContractError, DomainError


def _check(sym6: np.ndarray) -> np.ndarray:
    a = np.asarray(sym6, dtype=float)
    if a.shape[-1] != 6:
        raise DomainError(f"expected packed shape (..., 6), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix entries must be finite")
    return a


def _require_traceless(name: str, sym6: np.ndarray) -> None:
    trace = sym6[..., 0] + sym6[..., 1] + sym6[..., 2]
    scale = np.abs(sym6).max(axis=-1)
    if np.any(np.abs(trace) > 1e-12 * np.maximum(scale, 1.0)):
        raise ContractError(f"{name} must be traceless")


def eig_symm(sym6: np.ndarray) -> np.ndarray:
    """Eigenvalues of each packed matrix, ascending along the last axis."""
    a = _check(sym6)
    xx, yy, zz, xy, xz, yz = (a[..., i] for i in range(6))
    p1 = xy ** 2 + xz ** 2 + yz ** 2
    q = (xx + yy + zz) / 3.0
    p2 = (xx - q) ** 2 + (yy - q) ** 2 + (zz - q) ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    # guard the isotropic case; those points get eigenvalues (q, q, q)
    safe = np.where(p > 0.0, p, 1.0)
    bxx, byy, bzz = (xx - q) / safe, (yy - q) / safe, (zz - q) / safe
    bxy, bxz, byz = xy / safe, xz / safe, yz / safe
    detb = (bxx * (byy * bzz - byz ** 2)
            - bxy * (bxy * bzz - byz * bxz)
            + bxz * (bxy * byz - byy * bxz))
    phi = np.arccos(np.clip(detb / 2.0, -1.0, 1.0)) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    mid = 3.0 * q - hi - lo
    return np.stack([lo, mid, hi], axis=-1)


def lambda_max(sym6: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of each packed matrix."""
    return eig_symm(sym6)[..., 2]


def lambda_min(sym6: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of each packed matrix."""
    return eig_symm(sym6)[..., 0]


def pack_outer(v: np.ndarray) -> np.ndarray:
    """Packed symmetric outer product v (x) v, shape (..., 3) -> (..., 6)."""
    a = np.asarray(v, dtype=float)
    if a.shape[-1] != 3:
        raise DomainError(f"expected vector shape (..., 3), got {a.shape}")
    x, y, z = a[..., 0], a[..., 1], a[..., 2]
    return np.stack([x * x, y * y, z * z, x * y, x * z, y * z], axis=-1)


def gen_energy(v: np.ndarray, V: np.ndarray, G=None) -> np.ndarray:
    """Generalized energy density (3/2) lambda_max(v (x) v + G - V).

    ``V`` and ``G`` are packed traceless matrices; ``G`` may be ``None`` (or
    scalar zero) for the plain kinetic bound.  With G = 0 the result always
    dominates |v|^2 / 2, with equality exactly when V is the traceless outer
    product of v.
    """
    vv = np.asarray(v, dtype=float)
    if vv.shape[-1] != 3:
        raise DomainError(f"expected vector shape (..., 3), got {vv.shape}")
    if not np.all(np.isfinite(vv)):
        raise DomainError("vector entries must be finite")
    Va = _check(V)
    if G is None or (np.ndim(G) == 0 and float(G) == 0.0):
        Ga = np.zeros_like(Va)
    else:
        Ga = _check(G)
    _require_traceless("V", Va)
    _require_traceless("G", Ga)
    return 1.5 * eig_symm(pack_outer(vv) + Ga - Va)[..., 2]


def lipschitz_gap(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """|lambda_max(A) - lambda_max(B)|, bounded by the operator norm of A-B."""
    return np.abs(lambda_max(A) - lambda_max(B))


def _unpack(sym6: np.ndarray) -> np.ndarray:
    a = sym6
    m = np.empty(a.shape[:-1] + (3, 3))
    m[..., 0, 0] = a[..., 0]
    m[..., 1, 1] = a[..., 1]
    m[..., 2, 2] = a[..., 2]
    m[..., 0, 1] = m[..., 1, 0] = a[..., 3]
    m[..., 0, 2] = m[..., 2, 0] = a[..., 4]
    m[..., 1, 2] = m[..., 2, 1] = a[..., 5]
    return m


def min_eigenvector(sym6: np.ndarray) -> np.ndarray:
    """Unit eigenvector for the smallest eigenvalue of each packed matrix.

    Uses the spectral projector (A - l2 I)(A - l3 I), whose columns span the
    bottom eigenspace; degenerate spectra fall back through (A - l3 I) and
    finally to the vertical unit vector, any choice being a valid minimizer.
    """
    a = _check(sym6)
    lam = eig_symm(a)
    m = _unpack(a)
    eye = np.eye(3)
    scale = np.maximum(np.abs(lam).max(axis=-1), 1.0)
    m2 = m - lam[..., 1, None, None] * eye
    m3 = m - lam[..., 2, None, None] * eye
    proj = m2 @ m3
    vec = _best_column(proj)
    weak = np.linalg.norm(vec, axis=-1) <= 1e-8 * scale ** 2
    if np.any(weak):
        alt = _best_column(m3)
        vec = np.where(weak[..., None], alt, vec)
        still = np.linalg.norm(vec, axis=-1) <= 1e-8 * scale
        vec = np.where(still[..., None], np.array([0.0, 0.0, 1.0]), vec)
    return vec / np.linalg.norm(vec, axis=-1, keepdims=True)


def _best_column(m: np.ndarray) -> np.ndarray:
    norms = (m ** 2).sum(axis=-2)
    idx = norms.argmax(axis=-1)
    return np.take_along_axis(m, idx[..., None, None], axis=-1)[..., 0]
