"""Envelope structure: parameter charts, basis handling, and the Jacobian.

The constrained model forces the slope vector into a u-dimensional
subspace that also reduces the predictor covariance:

    beta = Gamma eta,   Sigma_x = Gamma Omega Gamma' + Gamma0 Omega0 Gamma0'

with span(Gamma) the "material" directions and span(Gamma0) its
orthogonal complement.  Subspaces are coordinatized with the pivoted
block chart Gamma = P' [I; A]: after a row permutation ``perm`` the top
u x u block is the identity and A holds the (p - u) x u free entries.
The chart covers every subspace whose pivoted leading block is
invertible, and the permutation is chosen by the initializer so that it
is well conditioned.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import contraction_matrix, expansion_matrix, unvech, vech

__all__ = [
    "NaturalParams",
    "EnvelopeParams",
    "CanonicalParams",
    "theta_dim",
    "zeta_dim",
    "build_basis",
    "env_map",
    "canonicalize",
    "jacobian_psi1",
]


def theta_dim(p):
    """Length of the stacked natural parameter (mu, beta, vech Sigma_x, mu_x)."""
    return 1 + 2 * p + p * (p + 1) // 2


def zeta_dim(p, u):
    """Free parameter count of the pivoted-block chart."""
    return 1 + u + (p - u) * u + u * (u + 1) // 2 \
        + (p - u) * (p - u + 1) // 2 + p


@dataclass
class NaturalParams:
    """Unconstrained model parameters.

    Vector order is (mu, beta, vech(sigma_x), mu_x) throughout the
    package; covariance blocks of estimates follow the same layout.
    """

    mu: float
    beta: np.ndarray
    sigma_x: np.ndarray
    mu_x: np.ndarray

    @property
    def p(self):
        return self.beta.shape[0]

    def to_vector(self):
        return np.concatenate([[self.mu], self.beta, vech(self.sigma_x), self.mu_x])

    @classmethod
    def from_vector(cls, v, p):
        v = np.asarray(v, dtype=float)
        if v.shape[0] != theta_dim(p):
            raise ValueError(f"expected length {theta_dim(p)}, got {v.shape[0]}")
        s = p * (p + 1) // 2
        return cls(mu=float(v[0]), beta=v[1:1 + p].copy(),
                   sigma_x=unvech(v[1 + p:1 + p + s]),
                   mu_x=v[1 + p + s:].copy())


@dataclass
class EnvelopeParams:
    """Chart coordinates of the constrained model.

    ``A`` is (p - u, u) and ``perm`` the row permutation of the pivoted
    basis stack; ``omega`` and ``omega0`` are symmetric positive
    definite.  The basis [I; A] is not orthonormal -- eta, omega carry
    the corresponding absorbed factors (see :func:`canonicalize`).
    """

    mu: float
    eta: np.ndarray
    A: np.ndarray
    omega: np.ndarray
    omega0: np.ndarray
    mu_x: np.ndarray
    perm: np.ndarray

    @property
    def p(self):
        return self.perm.shape[0]

    @property
    def u(self):
        return self.eta.shape[0]


@dataclass
class CanonicalParams:
    """Orthonormal-basis form of :class:`EnvelopeParams`."""

    mu: float
    eta: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    gamma0: np.ndarray
    omega0: np.ndarray
    mu_x: np.ndarray

    @property
    def p(self):
        return self.gamma.shape[0]

    @property
    def u(self):
        return self.gamma.shape[1]

    @property
    def beta(self):
        return self.gamma @ self.eta


def build_basis(A, perm):
    """Subspace basis and complement from chart coordinates.

    Returns (G, G0) with G rows perm[:u] forming the identity block and
    G0 = complement stack [-A'; I] under the same permutation, so that
    G' G0 = 0 exactly.  Neither basis is orthonormal.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be 2-D with shape (p - u, u)")
    perm = np.asarray(perm)
    p = perm.shape[0]
    u = A.shape[1]
    if sorted(perm.tolist()) != list(range(p)):
        raise ValueError("perm is not a permutation of 0..p-1")
    if A.shape[0] != p - u or not 1 <= u <= p:
        raise ValueError(f"A has shape {A.shape}, incompatible with p={p}")
    G = np.zeros((p, u))
    G[perm] = np.vstack([np.eye(u), A])
    G0 = np.zeros((p, p - u))
    G0[perm] = np.vstack([-A.T, np.eye(p - u)])
    return G, G0


def env_map(zeta):
    """Natural parameters implied by chart coordinates."""
    G, G0 = build_basis(zeta.A, zeta.perm)
    beta = G @ zeta.eta
    S = G @ zeta.omega @ G.T + G0 @ zeta.omega0 @ G0.T
    S = 0.5 * (S + S.T)
    return NaturalParams(mu=zeta.mu, beta=beta, sigma_x=S,
                         mu_x=np.asarray(zeta.mu_x, dtype=float).copy())


def _qr_positive(B):
    # thin QR with positive diagonal of R, deterministic sign convention
    p, u = B.shape
    if u == 0:
        return np.zeros((p, 0)), np.zeros((0, 0))
    Q, R = np.linalg.qr(B)
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d, R * d[:, None]


def canonicalize(zeta):
    """Rotate chart coordinates to an orthonormal-basis representation.

    QR-factorizes the pivoted stacks; the triangular factors are
    absorbed into eta, omega, omega0 so the natural parameters are
    unchanged: Gamma eta equals the chart's beta and the covariance
    reconstruction is identical.
    """
    G, G0 = build_basis(zeta.A, zeta.perm)
    Q, R = _qr_positive(G)
    Q0, R0 = _qr_positive(G0)
    eta = R @ zeta.eta
    omega = R @ zeta.omega @ R.T
    omega0 = R0 @ zeta.omega0 @ R0.T
    return CanonicalParams(mu=zeta.mu, eta=eta, gamma=Q,
                           omega=0.5 * (omega + omega.T), gamma0=Q0,
                           omega0=0.5 * (omega0 + omega0.T),
                           mu_x=np.asarray(zeta.mu_x, dtype=float).copy())


def jacobian_psi1(canon):
    """Gradient matrix of the natural parameters in the constrained model.

    Closed form evaluated at an orthonormal-basis point.  Rows follow
    the (mu, beta, vech Sigma_x, mu_x) layout; columns are the blocks
    (mu, eta, vec Gamma, vech Omega, vech Omega0, mu_x).  The vec(Gamma)
    block over-parameterizes the subspace, so the matrix has a null
    space; downstream covariance formulas depend on it only through its
    column space and use a pseudo-inverse.
    """
    p, u = canon.p, canon.u
    s = p * (p + 1) // 2
    G, G0 = canon.gamma, canon.gamma0
    Cp = contraction_matrix(p)
    Eu = expansion_matrix(u)
    E0 = expansion_matrix(p - u)

    n_rows = theta_dim(p)
    cols = [1, u, p * u, u * (u + 1) // 2, (p - u) * (p - u + 1) // 2, p]
    off = np.concatenate([[0], np.cumsum(cols)])
    Psi = np.zeros((n_rows, off[-1]))

    r_beta = slice(1, 1 + p)
    r_sig = slice(1 + p, 1 + p + s)
    r_mux = slice(1 + p + s, n_rows)

    Psi[0, 0] = 1.0
    Psi[r_beta, off[1]:off[2]] = G
    Psi[r_beta, off[2]:off[3]] = np.kron(canon.eta[None, :], np.eye(p))
    M0 = G0 @ canon.omega0 @ G0.T
    Psi[r_sig, off[2]:off[3]] = 2.0 * Cp @ (
        np.kron(G @ canon.omega, np.eye(p)) - np.kron(G, M0))
    Psi[r_sig, off[3]:off[4]] = Cp @ np.kron(G, G) @ Eu
    if u < p:
        Psi[r_sig, off[4]:off[5]] = Cp @ np.kron(G0, G0) @ E0
    Psi[r_mux, off[5]:off[6]] = np.eye(p)
    return Psi
