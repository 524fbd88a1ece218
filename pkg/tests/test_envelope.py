import numpy as np
import pytest
from numpy.testing import assert_allclose

from envhuber.envelope import (EnvelopeParams, NaturalParams, build_basis,
                               canonicalize, env_map, jacobian_psi1,
                               theta_dim, zeta_dim)
from envhuber.linalg import projection, vech
from envhuber.simulation import build_truth


def _random_zeta(p, u, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((p - u, u))
    Bw = rng.standard_normal((u, u))
    B0 = rng.standard_normal((p - u, p - u))
    return EnvelopeParams(
        mu=float(rng.standard_normal()),
        eta=rng.standard_normal(u),
        A=A,
        omega=Bw @ Bw.T + u * np.eye(u),
        omega0=B0 @ B0.T + (p - u) * np.eye(p - u),
        mu_x=rng.standard_normal(p),
        perm=rng.permutation(p),
    )


def test_dimension_counts():
    assert theta_dim(12) == 1 + 24 + 78
    assert theta_dim(1) == 4
    assert zeta_dim(12, 2) == 93
    assert zeta_dim(3, 1) == 1 + 1 + 2 + 1 + 3 + 3
    # the chart never has more free parameters than the moment count
    for p in (2, 5, 9):
        for u in range(1, p + 1):
            assert zeta_dim(p, u) <= theta_dim(p)
    assert zeta_dim(4, 4) == theta_dim(4)


def test_natural_params_vector_round_trip():
    rng = np.random.default_rng(1)
    S = rng.standard_normal((4, 4))
    th = NaturalParams(mu=0.7, beta=rng.standard_normal(4),
                       sigma_x=S + S.T, mu_x=rng.standard_normal(4))
    back = NaturalParams.from_vector(th.to_vector(), 4)
    assert_allclose(back.mu, th.mu)
    assert_allclose(back.beta, th.beta)
    assert_allclose(back.sigma_x, th.sigma_x)
    assert_allclose(back.mu_x, th.mu_x)
    with pytest.raises(ValueError):
        NaturalParams.from_vector(th.to_vector()[:-1], 4)


def test_build_basis_exact_orthogonality():
    rng = np.random.default_rng(2)
    for p, u in [(5, 2), (6, 1), (4, 4), (3, 2)]:
        A = rng.standard_normal((p - u, u))
        perm = rng.permutation(p)
        G, G0 = build_basis(A, perm)
        assert G.shape == (p, u) and G0.shape == (p, p - u)
        assert_allclose(G.T @ G0, np.zeros((u, p - u)), atol=1e-14)
        assert_allclose(G[perm[:u]], np.eye(u))
        if u < p:
            assert_allclose(G0[perm[u:]], np.eye(p - u))


def test_build_basis_validation():
    with pytest.raises(ValueError):
        build_basis(np.zeros(3), np.arange(4))            # A not 2-D
    with pytest.raises(ValueError):
        build_basis(np.zeros((2, 2)), np.array([0, 1, 1, 3]))
    with pytest.raises(ValueError):
        build_basis(np.zeros((3, 2)), np.arange(4))       # wrong row count


def test_env_map_reconstruction():
    zeta = _random_zeta(6, 2, seed=3)
    th = env_map(zeta)
    G, G0 = build_basis(zeta.A, zeta.perm)
    assert_allclose(th.beta, G @ zeta.eta, rtol=1e-12)
    S = G @ zeta.omega @ G.T + G0 @ zeta.omega0 @ G0.T
    assert_allclose(th.sigma_x, S, rtol=1e-12)
    assert_allclose(th.sigma_x, th.sigma_x.T)


def test_canonicalize_preserves_natural_params():
    for p, u, seed in [(6, 2, 4), (5, 1, 5), (4, 4, 6)]:
        zeta = _random_zeta(p, u, seed=seed)
        th = env_map(zeta)
        canon = canonicalize(zeta)
        assert_allclose(canon.gamma.T @ canon.gamma, np.eye(u), atol=1e-12)
        if u < p:
            assert_allclose(canon.gamma.T @ canon.gamma0,
                            np.zeros((u, p - u)), atol=1e-12)
        assert_allclose(canon.beta, th.beta, rtol=1e-10, atol=1e-12)
        S = canon.gamma @ canon.omega @ canon.gamma.T
        if u < p:
            S = S + canon.gamma0 @ canon.omega0 @ canon.gamma0.T
        assert_allclose(S, th.sigma_x, rtol=1e-10, atol=1e-12)
        # triangular factors absorbed: omega stays symmetric PD
        assert np.linalg.eigvalsh(canon.omega).min() > 0


def test_truth_canonicalization_matches_construction():
    truth = build_truth(12, 2)
    assert_allclose(truth.beta, np.full(12, 0.1), rtol=1e-12)
    assert_allclose(truth.gamma.T @ truth.gamma, np.eye(2), atol=1e-12)
    ev = np.sort(np.linalg.eigvalsh(truth.sigma_x))
    assert_allclose(ev[-1], 100.0, rtol=1e-10)
    assert_allclose(ev[-2], 9.0, rtol=1e-10)
    assert_allclose(ev[:-2], np.ones(10), rtol=1e-10)


def _fd_jacobian(zeta, h=1e-6):
    # finite differences of the natural parameter vector in chart coords
    from envhuber.gmm import pack_zeta, unpack_zeta
    p, u = zeta.p, zeta.u
    v0 = pack_zeta(zeta)
    cols = []
    for i in range(v0.shape[0]):
        vp, vm = v0.copy(), v0.copy()
        vp[i] += h
        vm[i] -= h
        tp = env_map(unpack_zeta(vp, p, u, zeta.perm)).to_vector()
        tm = env_map(unpack_zeta(vm, p, u, zeta.perm)).to_vector()
        cols.append((tp - tm) / (2.0 * h))
    return np.column_stack(cols)


def test_jacobian_column_space_matches_finite_differences():
    # the closed form over-parameterizes the subspace, so compare the
    # tangent spaces, not the matrices
    for p, u, seed in [(4, 2, 7), (5, 1, 8), (5, 4, 9)]:
        zeta = _random_zeta(p, u, seed=seed)
        psi = jacobian_psi1(canonicalize(zeta))
        fd = _fd_jacobian(zeta)
        assert psi.shape[0] == theta_dim(p)
        gap = np.linalg.norm(projection(psi) - projection(fd))
        assert gap < 1e-6


def test_jacobian_full_dimension_spans_everything():
    zeta = _random_zeta(3, 3, seed=10)
    psi = jacobian_psi1(canonicalize(zeta))
    assert_allclose(projection(psi), np.eye(theta_dim(3)), atol=1e-9)


def test_jacobian_beta_rows():
    zeta = _random_zeta(5, 2, seed=11)
    canon = canonicalize(zeta)
    psi = jacobian_psi1(canon)
    # beta rows: d beta/d eta = Gamma at the canonical point
    assert_allclose(psi[1:6, 1:3], canon.gamma, rtol=1e-12)
    # mu and mu_x blocks are identities
    assert_allclose(psi[0, 0], 1.0)
    assert_allclose(psi[-5:, -5:], np.eye(5))
    # sigma rows reconstruct through vech of the symmetrized product
    dO = np.zeros((2, 2))
    dO[0, 0] = 1.0
    col = psi[6:21, 3 + 2 * 5]           # first vech(Omega) coordinate
    assert_allclose(col, vech(canon.gamma @ dO @ canon.gamma.T), atol=1e-12)
