import time

import numpy as np
import pytest

from wildflow import symmat
from wildflow.fields import ContractError, DomainError


def pack(m):
    return np.array([m[0, 0], m[1, 1], m[2, 2], m[0, 1], m[0, 2], m[1, 2]])


def test_known_matrices():
    lam = symmat.eig_symm(pack(np.diag([3.0, -1.0, 2.0])))
    assert np.allclose(lam, [-1.0, 2.0, 3.0])
    lam = symmat.eig_symm(pack(np.eye(3) * 4.0))
    assert np.allclose(lam, [4.0, 4.0, 4.0])
    lam = symmat.eig_symm(pack(np.zeros((3, 3))))
    assert np.allclose(lam, 0.0)
    # 2x2 rotation-coupled block: eigenvalues 0, 1 +- 1
    m = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    lam = symmat.eig_symm(pack(m))
    # degenerate pairs cost a few digits in the closed form; that is expected
    assert np.allclose(lam, [0.0, 0.0, 2.0], atol=1e-7)


def test_matches_dense_solver_random():
    rng = np.random.default_rng(42)
    for _ in range(200):
        g = rng.normal(size=(3, 3)) * 10.0 ** rng.integers(-3, 4)
        m = (g + g.T) / 2.0
        lam = symmat.eig_symm(pack(m))
        ref = np.linalg.eigvalsh(m)
        scale = max(1.0, np.abs(ref).max())
        assert np.abs(lam - ref).max() <= 1e-10 * scale


def test_batched_shapes():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 5, 6))
    lam = symmat.eig_symm(a)
    assert lam.shape == (4, 5, 3)
    assert np.all(np.diff(lam, axis=-1) >= -1e-12)
    assert symmat.lambda_max(a).shape == (4, 5)


def test_near_degenerate_accuracy():
    rng = np.random.default_rng(3)
    for eps in (1e-6, 1e-10, 0.0):
        for _ in range(20):
            g = rng.normal(size=(3, 3))
            q = np.linalg.qr(g)[0]
            d = np.diag([1.0, 1.0 + eps, 2.0])
            m = q @ d @ q.T
            m = (m + m.T) / 2.0
            lam = symmat.eig_symm(pack(m))
            ref = np.linalg.eigvalsh(m)
            assert np.abs(lam - ref).max() <= 1e-8


def test_min_eigenvector_residual():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(500, 6))
    lam = symmat.eig_symm(a)
    v = symmat.min_eigenvector(a)
    assert np.allclose(np.linalg.norm(v, axis=-1), 1.0)
    m = np.empty((500, 3, 3))
    m[:, 0, 0], m[:, 1, 1], m[:, 2, 2] = a[:, 0], a[:, 1], a[:, 2]
    m[:, 0, 1] = m[:, 1, 0] = a[:, 3]
    m[:, 0, 2] = m[:, 2, 0] = a[:, 4]
    m[:, 1, 2] = m[:, 2, 1] = a[:, 5]
    res = np.einsum("nij,nj->ni", m, v) - lam[:, :1] * v
    scale = np.maximum(np.abs(lam).max(axis=-1), 1.0)
    assert (np.linalg.norm(res, axis=-1) / scale).max() <= 1e-6


def test_min_eigenvector_degenerate():
    v = symmat.min_eigenvector(np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]))
    assert np.allclose(np.linalg.norm(v), 1.0)
    # bottom eigenspace is the xy-plane here
    v = symmat.min_eigenvector(np.array([0.0, 0.0, 5.0, 0.0, 0.0, 0.0]))
    assert abs(v[2]) <= 1e-9


def test_rejects_bad_input():
    with pytest.raises(DomainError):
        symmat.eig_symm(np.zeros(5))
    with pytest.raises(DomainError):
        symmat.eig_symm(np.array([np.inf, 0, 0, 0, 0, 0.0]))


def test_throughput_hundred_thousand():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(100_000, 6))
    t0 = time.perf_counter()
    lam = symmat.eig_symm(a)
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    sample = rng.integers(0, a.shape[0], size=200)
    for i in sample:
        m = np.array([[a[i, 0], a[i, 3], a[i, 4]],
                      [a[i, 3], a[i, 1], a[i, 5]],
                      [a[i, 4], a[i, 5], a[i, 2]]])
        assert np.abs(lam[i] - np.linalg.eigvalsh(m)).max() <= 1e-9


def traceless(rng, shape=()):
    a = rng.normal(size=shape + (6,))
    tr = (a[..., 0] + a[..., 1] + a[..., 2]) / 3.0
    a[..., :3] -= tr[..., None]
    return a


def test_lambda_min_and_shift():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(300, 6))
    assert np.abs(symmat.lambda_min(a) + symmat.lambda_max(-a)).max() <= 1e-10
    c = rng.normal(size=300)
    shifted = a.copy()
    shifted[:, :3] += c[:, None]
    gap = symmat.lambda_max(shifted) - (symmat.lambda_max(a) + c)
    assert np.abs(gap).max() <= 1e-9


def test_gen_energy_equality_case():
    v = np.array([1.0, 2.0, 2.0])
    sat = symmat.pack_outer(v)
    sat[:3] -= np.dot(v, v) / 3.0
    assert abs(symmat.gen_energy(v, sat) - 4.5) <= 1e-12
    assert symmat.gen_energy(np.zeros(3), np.zeros(6), np.zeros(6)) == 0.0
    # any traceless perturbation off the saturating tensor breaks equality
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = traceless(rng)
        e = symmat.gen_energy(v, sat + 0.1 * p)
        assert e >= 4.5 - 1e-12
        if np.abs(p).max() > 1e-3:
            assert e > 4.5 + 1e-12


def test_gen_energy_bounds_random():
    rng = np.random.default_rng(19)
    n = 100_000
    v = rng.normal(size=(n, 3)) * 10.0 ** rng.integers(-2, 3, size=(n, 1))
    u = traceless(rng, (n,)) * 10.0 ** rng.integers(-2, 3, size=(n, 1))
    e = symmat.gen_energy(v, np.zeros((n, 6)), u)
    kinetic = 0.5 * (v ** 2).sum(axis=-1)
    scale = np.maximum(np.abs(u).max(axis=-1), kinetic)
    assert np.all(kinetic <= e + 1e-12 * np.maximum(scale, 1.0))
    linf = np.abs(u).max(axis=-1)
    ok = e >= 0.0
    assert np.all(linf[ok] <= (4.0 / 3.0) * e[ok] + 1e-12 * np.maximum(scale[ok], 1.0))


def test_gen_energy_convex_midpoint():
    rng = np.random.default_rng(23)
    for _ in range(200):
        v1, v2 = rng.normal(size=(2, 3))
        V = traceless(rng)
        G = traceless(rng)
        mid = symmat.gen_energy((v1 + v2) / 2.0, V, G)
        avg = 0.5 * (symmat.gen_energy(v1, V, G) + symmat.gen_energy(v2, V, G))
        assert mid <= avg + 1e-12 * max(1.0, avg)


def test_gen_energy_contracts():
    v = np.ones(3)
    bad = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    with pytest.raises(ContractError):
        symmat.gen_energy(v, bad)
    with pytest.raises(ContractError):
        symmat.gen_energy(v, np.zeros(6), bad)
    with pytest.raises(DomainError):
        symmat.gen_energy(np.ones(4), np.zeros(6))


def test_lipschitz_gap():
    a = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    assert symmat.lipschitz_gap(a, a) == 0.0
    assert abs(symmat.lipschitz_gap(a, np.zeros(6)) - 1.0) <= 1e-12
    rng = np.random.default_rng(29)
    n = 100_000
    A = rng.normal(size=(n, 6)) * 10.0 ** rng.integers(-2, 3, size=(n, 1))
    B = rng.normal(size=(n, 6)) * 10.0 ** rng.integers(-2, 3, size=(n, 1))
    gap = symmat.lipschitz_gap(A, B)
    lam = symmat.eig_symm(A - B)
    opnorm = np.abs(lam).max(axis=-1)
    assert np.all(gap <= opnorm + 1e-12 * np.maximum(opnorm, 1.0))
