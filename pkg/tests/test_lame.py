import numpy as np
import pytest

from wildflow import fields as F
from wildflow import lame


def manufactured(nx, ny, nz):
    """v* = (sin(2pi x) sin(pi z), 0, 0) and its image under the operator."""
    g = F.Grid(nx, ny, nz, 1, 1.0)
    x = g.x[None, :, None, None]
    z = g.z[None, None, None, :]
    shape = (1, nx, ny, nz + 1)
    f = np.sin(2 * np.pi * x) * np.sin(np.pi * z) * np.ones(shape)
    vstar = np.stack([f, np.zeros_like(f), np.zeros_like(f)], axis=-1)
    g1 = -(19.0 / 3.0) * np.pi ** 2 * f
    g3 = ((2.0 / 3.0) * np.pi ** 2 * np.cos(2 * np.pi * x)
          * np.cos(np.pi * z) * np.ones(shape))
    rhs = np.stack([g1, np.zeros_like(f), g3], axis=-1)
    return g, F.VectorField(g, rhs, ("generic",) * 3), vstar


def generic(v):
    return F.VectorField(v.grid, v.data, ("generic",) * 3)


def test_zero_rhs_gives_zero():
    g = F.Grid(8, 8, 8, 1, 1.0)
    sol = lame.solve_lame(F.VectorField.zeros(g, ("generic",) * 3))
    assert np.all(sol.v.data == 0.0)
    assert sol.residual_norm == 0.0


def test_manufactured_recovery_32():
    g, rhs, vstar = manufactured(32, 32, 32)
    sol = lame.solve_lame(rhs)
    err = np.linalg.norm(sol.v.data - vstar) / np.linalg.norm(vstar)
    assert err <= 1e-6
    # faces are pinned per mode; the inverse transforms add only rounding
    assert np.abs(sol.v.data[:, :, :, 0, :]).max() <= 1e-12
    assert np.abs(sol.v.data[:, :, :, -1, :]).max() <= 1e-12


def test_convergence_order_in_nz():
    errs = []
    for nz in (16, 32, 64):
        g, rhs, vstar = manufactured(8, 8, nz)
        sol = lame.solve_lame(rhs)
        errs.append(np.linalg.norm(sol.v.data - vstar) / np.linalg.norm(vstar))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 2.0
    assert errs[1] <= 1e-6


def test_potential_matches_deformation_of_manufactured():
    g, rhs, vstar = manufactured(16, 16, 32)
    pot = lame.to_sym_potential(rhs)
    ref = lame.d0(F.VectorField(g, vstar, ("generic",) * 3))
    err = np.linalg.norm(pot.data - ref.data) / np.linalg.norm(ref.data)
    assert err <= 1e-6


def test_potential_interior_divergence_residual():
    g = F.Grid(16, 16, 16, 1, 1.0)
    for seed in range(5):
        w = generic(F.random_smooth_vector(g, seed=seed, steady=True))
        pot = lame.to_sym_potential(w)
        assert np.abs(pot.sym6()[..., :3].sum(-1)).max() <= 1e-12
        res = F.divergence(pot).data - w.data
        rel = (np.linalg.norm(res[:, :, :, 1:-1, :])
               / np.linalg.norm(w.data[:, :, :, 1:-1, :]))
        assert rel <= 1e-6


def test_linearity_of_solve():
    g = F.Grid(12, 12, 12, 1, 1.0)
    a = generic(F.random_smooth_vector(g, seed=100, steady=True))
    b = generic(F.random_smooth_vector(g, seed=200, steady=True))
    c = F.VectorField(g, a.data + b.data, ("generic",) * 3)
    va = lame.solve_lame(a).v.data
    vb = lame.solve_lame(b).v.data
    vc = lame.solve_lame(c).v.data
    scale = np.abs(vc).max()
    assert np.abs(vc - va - vb).max() <= 1e-8 * max(scale, 1e-30)


def test_boundedness_regression_constant():
    # operator norm proxy measured over seeded smooth inputs; frozen with
    # headroom over the observed maximum 0.145
    g = F.Grid(32, 32, 32, 1, 1.0)
    for seed in range(6):
        w = generic(F.random_smooth_vector(g, seed=seed, steady=True))
        pot = lame.to_sym_potential(w)
        assert F.l2_norm(pot) <= 0.25 * F.l2_norm(w)


def test_trajectory_batch_matches_slicewise():
    g = F.Grid(8, 8, 8, 4, 1.0)
    w = generic(F.random_smooth_vector(g, seed=9))
    batch = lame.solve_lame(w)
    for k in range(g.nt):
        s = F.slice_field(w, k)
        single = lame.solve_lame(s)
        assert np.abs(single.v.data[0] - batch.v.data[k]).max() <= 1e-11


def test_tol_contract():
    g = F.Grid(8, 8, 8, 1, 1.0)
    w = F.VectorField.zeros(g, ("generic",) * 3)
    with pytest.raises(F.ContractError):
        lame.solve_lame(w, tol=1e-3)
    with pytest.raises(F.ContractError):
        lame.solve_lame(w, tol=0.0)


def test_legendre_hadamard_values():
    assert abs(lame.legendre_hadamard_form([1, 0, 0], [1, 0, 0]) - 4 / 3) <= 1e-12
    assert abs(lame.legendre_hadamard_form([1, 0, 0], [0, 1, 0]) - 1.0) <= 1e-12
    rng = np.random.default_rng(5)
    for _ in range(200):
        xi, eta = rng.normal(size=(2, 3))
        got = lame.legendre_hadamard_form(xi, eta)
        want = (xi @ xi) * (eta @ eta) + (xi @ eta) ** 2 / 3.0
        assert abs(got - want) <= 1e-12 * max(1.0, abs(want))
        assert got >= (xi @ xi) * (eta @ eta) - 1e-12


def test_d0_of_canonical_velocity_keeps_tensor_parity():
    g = F.Grid(12, 12, 12, 2, 1.0)
    v = F.random_smooth_vector(g, seed=3)
    T = lame.d0(v)
    assert T.zparity == F.TENSOR_PARITY
    assert np.abs(T.data[:, :, :, 0, 3:]).max() <= 1e-12  # xz, yz vanish on faces
