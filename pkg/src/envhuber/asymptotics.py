"""Asymptotic covariances and the scalar efficiency factor.

The unconstrained estimate obeys a sandwich law; the constrained
estimate projects that sandwich onto the tangent space of the envelope
structure.  When the error is independent of the predictors the slope
block collapses to a closed form driven by a single scalar,

    factor = E[psi_k(e)^2] / E[psi_k'(e)]^2,

which plays the role the error variance plays for least squares.  Six
reference error laws are bundled for the factor table and the
simulation harness.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize, stats

from .envelope import jacobian_psi1, theta_dim
from .huber import MAD_NORMALIZER, huber_psi, huber_psi_prime
from .linalg import sym_inv, sym_pinv, vech, vech_indices

__all__ = [
    "ErrorDistribution",
    "ERROR_DISTRIBUTIONS",
    "population_k",
    "huber_factor",
    "sandwich_avar",
    "projected_avar",
    "fit_avar",
    "known_gamma_avar",
    "closed_form_slope_avar",
]


@dataclass
class ErrorDistribution:
    """Symmetric error law with the hooks the package needs.

    ``sample`` draws n variates from a numpy Generator; ``var`` may be
    inf (heavy tails).  ``mad`` is the population median of |e|.
    """

    name: str
    pdf: Callable
    cdf: Callable
    var: float
    mad: float
    sample: Callable = field(repr=False)


def _mixnorm_pdf(x):
    return 0.9 * stats.norm.pdf(x) + 0.1 * stats.norm.pdf(x, scale=5.0)


def _mixnorm_cdf(x):
    return 0.9 * stats.norm.cdf(x) + 0.1 * stats.norm.cdf(x, scale=5.0)


def _sample_normal(rng, n):
    return rng.standard_normal(n)


def _sample_t3(rng, n):
    return rng.standard_t(3, size=n)


def _sample_mixnorm(rng, n):
    # component indicator first, then the normal draw
    wide = rng.random(n) < 0.1
    z = rng.standard_normal(n)
    return np.where(wide, 5.0 * z, z)


def _sample_laplace(rng, n):
    return rng.laplace(0.0, 1.0, size=n)


def _sample_sgamma(rng, n):
    # Gamma(shape 2, scale 2) magnitude as a sum of two exponentials
    mag = rng.exponential(2.0, size=n) + rng.exponential(2.0, size=n)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return sign * mag


def _sample_cauchy(rng, n):
    return rng.standard_cauchy(n)


_gamma22 = stats.gamma(a=2.0, scale=2.0)

ERROR_DISTRIBUTIONS = {
    "normal": ErrorDistribution(
        "normal", stats.norm.pdf, stats.norm.cdf, 1.0,
        float(stats.norm.ppf(0.75)), _sample_normal),
    "t3": ErrorDistribution(
        "t3", stats.t(3).pdf, stats.t(3).cdf, 3.0,
        float(stats.t(3).ppf(0.75)), _sample_t3),
    "mixnorm": ErrorDistribution(
        "mixnorm", _mixnorm_pdf, _mixnorm_cdf, 3.4,
        float(optimize.brentq(lambda q: _mixnorm_cdf(q) - 0.75, 0.1, 10.0)),
        _sample_mixnorm),
    "laplace": ErrorDistribution(
        "laplace", stats.laplace.pdf, stats.laplace.cdf, 2.0,
        float(stats.laplace.ppf(0.75)), _sample_laplace),
    "sgamma": ErrorDistribution(
        "sgamma", lambda x: 0.5 * _gamma22.pdf(np.abs(x)),
        lambda x: 0.5 + 0.5 * np.sign(x) * _gamma22.cdf(np.abs(x)),
        24.0, float(_gamma22.ppf(0.5)), _sample_sgamma),
    "cauchy": ErrorDistribution(
        "cauchy", stats.cauchy.pdf, stats.cauchy.cdf, np.inf,
        float(stats.cauchy.ppf(0.75)), _sample_cauchy),
}


def population_k(dist):
    """Rule-of-thumb cutoff at the population level: 1.345 * MAD / 0.6745."""
    if isinstance(dist, str):
        dist = ERROR_DISTRIBUTIONS[dist]
    return 1.345 * dist.mad / MAD_NORMALIZER


def huber_factor(dist, k):
    """Efficiency factor E[psi^2] / E[psi']^2 by quadrature.

    For symmetric laws E[psi'] = 2F(k) - 1 and
    E[psi^2] = 2 int_0^k x^2 f(x) dx + 2 k^2 (1 - F(k)).  ``k = inf``
    returns the error variance (the least-squares limit).
    """
    if isinstance(dist, str):
        dist = ERROR_DISTRIBUTIONS[dist]
    if np.isinf(k):
        return dist.var
    denom = 2.0 * float(dist.cdf(k)) - 1.0
    if denom <= 0:
        raise ValueError(f"cutoff k={k} leaves no mass inside the clamp")
    core, _ = integrate.quad(lambda x: x * x * dist.pdf(x), 0.0, k,
                             epsabs=1e-13, epsrel=1e-11, limit=200)
    num = 2.0 * core + 2.0 * k * k * (1.0 - float(dist.cdf(k)))
    return num / denom ** 2


def sandwich_avar(y, X, gee):
    """Plug-in sandwich covariance of the unconstrained estimate.

    Returns the asymptotic covariance of sqrt(n) (theta_tilde - theta)
    in the (mu, beta, vech Sigma_x, mu_x) layout.  The bread is block
    diagonal with identity moment-derivative blocks for the covariance
    and mean parts; the score/covariance cross blocks of the middle are
    zero by symmetry and imposed exactly.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    s = p * (p + 1) // 2
    dim = theta_dim(p)
    W = np.column_stack([np.ones(n), X])
    r = y - gee.mu - X @ gee.beta

    psi = huber_psi(r, gee.k)
    psip = huber_psi_prime(r, gee.k)
    U11 = (W * psip[:, None]).T @ W / n
    V11 = (W * (psi * psi)[:, None]).T @ W / n

    B = X - gee.mu_x
    rows, cols = vech_indices(p)
    H = B[:, rows] * B[:, cols]            # n x s, rows are vech(bb')
    Hc = H - vech(gee.sigma_x)             # mean of H is vech(S_x) exactly
    V22 = Hc.T @ Hc / n
    V23 = Hc.T @ B / n
    V33 = gee.sigma_x

    U = np.eye(dim)
    U[:1 + p, :1 + p] = U11
    V = np.zeros((dim, dim))
    V[:1 + p, :1 + p] = V11
    V[1 + p:1 + p + s, 1 + p:1 + p + s] = V22
    V[1 + p:1 + p + s, 1 + p + s:] = V23
    V[1 + p + s:, 1 + p:1 + p + s] = V23.T
    V[1 + p + s:, 1 + p + s:] = V33

    Uinv = np.eye(dim)
    Uinv[:1 + p, :1 + p] = sym_inv(U11)    # rejects a degenerate clamp
    avar = Uinv @ V @ Uinv
    return 0.5 * (avar + avar.T)


def projected_avar(psi1, avar_tilde):
    """Project an unconstrained covariance onto the structured tangent.

    Computes Psi (Psi' avar^{+} Psi)^+ Psi'; the result depends on
    ``psi1`` only through its column space, so any chart convention with
    the right tangent span gives the same answer.  Pseudo-inverses keep
    the projection defined for semidefinite input (resamples with
    duplicated rows), and agree with plain inverses when it is definite.
    """
    J = sym_pinv(avar_tilde)
    inner = psi1.T @ J @ psi1
    out = psi1 @ sym_pinv(inner) @ psi1.T
    return 0.5 * (out + out.T)


def fit_avar(y, X, gee, canon):
    """Sandwich covariance of the constrained fit at its canonical point."""
    return projected_avar(jacobian_psi1(canon), sandwich_avar(y, X, gee))


def known_gamma_avar(factor, gamma, omega):
    """Slope covariance when the material subspace is known in advance."""
    return factor * gamma @ sym_inv(omega) @ gamma.T


def closed_form_slope_avar(factor, canon):
    """Closed-form slope covariance for independent error and centered x.

    Equals the beta block of :func:`projected_avar` under normal
    predictors; the first term is the known-subspace covariance, the
    second the price of estimating the subspace.
    """
    G, G0 = canon.gamma, canon.gamma0
    eta, omega, omega0 = canon.eta, canon.omega, canon.omega0
    u = eta.shape[0]
    p = G.shape[0]
    if u == p:
        return known_gamma_avar(factor, G, omega)
    T = (np.kron(np.outer(eta, eta), omega0) / factor
         + np.kron(omega, sym_inv(omega0))
         + np.kron(sym_inv(omega), omega0)
         - 2.0 * np.eye(u * (p - u)))
    M = np.kron(eta[None, :], G0)          # p x u(p-u)
    out = known_gamma_avar(factor, G, omega) + M @ sym_pinv(T) @ M.T
    return 0.5 * (out + out.T)
