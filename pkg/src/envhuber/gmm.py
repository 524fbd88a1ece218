"""Constrained moment fitting of the envelope-structured Huber model.

The unconstrained solution zeroes the stacked moment vector

    g(z; theta) = ( psi_k(y - mu - x'beta) (1, x')',
                    vech(Sigma_x) - vech((x - mu_x)(x - mu_x)'),
                    mu_x - x )

exactly.  The constrained fit minimizes the quadratic form
G_n(theta)' Delta G_n(theta) over the envelope chart, with Delta the
inverse sample second moment of g at the unconstrained solution
(two-step weighting, held fixed during the search).  The search runs in
an identified chart: subspace coordinates A after row pivoting, and
Cholesky factors with log diagonals for the two covariance blocks.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .asymptotics import fit_avar
from .envelope import (CanonicalParams, EnvelopeParams, NaturalParams,
                       build_basis, canonicalize, env_map, zeta_dim)
from .huber import gee_solution, huber_psi, select_k, validate_xy
from .linalg import subspace_distance, sym_inv, vech, vech_indices
from .optimize import nelder_mead

__all__ = [
    "moment_g",
    "sample_moment",
    "WeightMatrix",
    "weight_matrix",
    "gmm_objective",
    "InitBasis",
    "pls_initializer",
    "start_charts",
    "pack_zeta",
    "unpack_zeta",
    "FitResult",
    "fit_ehr",
    "fit_env_ls",
]


def moment_g(yi, xi, theta, k):
    """Moment vector of a single observation at natural parameters."""
    xi = np.asarray(xi, dtype=float)
    r = float(yi) - theta.mu - xi @ theta.beta
    psi = float(huber_psi(r, k))
    d = xi - theta.mu_x
    return np.concatenate([
        psi * np.concatenate([[1.0], xi]),
        vech(theta.sigma_x) - vech(np.outer(d, d)),
        theta.mu_x - xi,
    ])


def sample_moment(y, X, theta, k):
    """Moment vector averaged over the sample."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    rows, cols = vech_indices(p)
    xbar = X.mean(axis=0)
    Xc = X - xbar
    Sx = Xc.T @ Xc / n

    psi = huber_psi(y - theta.mu - X @ theta.beta, k)
    g1 = np.concatenate([[psi.mean()], psi @ X / n])
    d = xbar - theta.mu_x
    # (1/n) sum (x_i - mu_x)(x_i - mu_x)' = S_x + d d'
    g2 = vech(theta.sigma_x) - Sx[rows, cols] - d[rows] * d[cols]
    g3 = theta.mu_x - xbar
    return np.concatenate([g1, g2, g3])


@dataclass
class WeightMatrix:
    """Inverse moment second-moment matrix with conditioning diagnostics."""

    delta: np.ndarray
    cond: float
    ridged: bool


def weight_matrix(y, X, gee, cond_limit=1e12, ridge_scale=1e-4):
    """Second-step GMM weight: inverse of (1/n) sum g_i g_i' at the
    unconstrained solution.

    A ridge of ridge_scale * trace/m is added when the condition number
    exceeds ``cond_limit``, which keeps the inverse defined for nearly
    degenerate designs; the flag records whether that happened.  The
    scale matters when n is below the moment count m (small samples,
    resamples with duplicated rows): the scatter is then singular by
    construction, and a ridge near float noise would make the objective
    enforce its null-space components with absurd weight.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    rows, cols = vech_indices(p)
    W = np.column_stack([np.ones(n), X])
    psi = huber_psi(y - gee.mu - X @ gee.beta, gee.k)
    B = X - gee.mu_x
    H = B[:, rows] * B[:, cols]
    Gmat = np.concatenate([
        W * psi[:, None],
        vech(gee.sigma_x)[None, :] - H,
        gee.mu_x[None, :] - X,
    ], axis=1)
    M = Gmat.T @ Gmat / n
    M = 0.5 * (M + M.T)
    m = M.shape[0]
    if n < m:
        warnings.warn(f"n = {n} observations for m = {m} moments; the "
                      "weight scatter is singular and will be ridged",
                      RuntimeWarning, stacklevel=2)
    w = np.linalg.eigvalsh(M)
    cond = np.inf if w[0] <= 0 else float(w[-1] / w[0])
    ridged = cond > cond_limit
    if ridged:
        M = M + (ridge_scale * np.trace(M) / m) * np.eye(m)
    return WeightMatrix(delta=sym_inv(M), cond=cond, ridged=ridged)


def gmm_objective(y, X, zeta, delta, k):
    """Quadratic-form objective at chart coordinates (reference path).

    The optimizer uses a precomputed closure that evaluates the same
    quantity; this entry point exists for direct calls and testing.
    """
    g = sample_moment(y, X, env_map(zeta), k)
    return float(g @ delta @ g)


@dataclass
class InitBasis:
    """Initial subspace estimate in chart form."""

    basis: np.ndarray
    A: np.ndarray
    perm: np.ndarray
    flagged: bool
    label: str = ""


def _chart_from_basis(Q, flagged=False, label=""):
    # row pivoting for a well-conditioned leading block, then A = rest / lead
    p, u = Q.shape
    _, _, piv = scipy.linalg.qr(Q.T, pivoting=True)
    perm = np.asarray(piv)
    lead = Q[perm[:u], :]
    A = Q[perm[u:], :] @ np.linalg.inv(lead)
    return InitBasis(basis=Q, A=A, perm=perm, flagged=flagged, label=label)


def _krylov_stack(Sx, v, u):
    p = Sx.shape[0]
    K = np.empty((p, u))
    w = v
    for j in range(u):
        K[:, j] = w
        w = Sx @ w
    norms = np.linalg.norm(K, axis=0)
    return K / np.where(norms > 0, norms, 1.0)


def _complete_basis(K, Sx, u):
    # orthonormalize; pad a numerically rank-deficient stack with top
    # predictor-variance directions and flag it
    Q, R, _ = scipy.linalg.qr(K, mode="economic", pivoting=True)
    dR = np.abs(np.diag(R))
    rank = int(np.sum(dR > 1e-10 * (dR[0] if dR.size and dR[0] > 0 else 1.0)))
    flagged = rank < u
    basis = Q[:, :rank]
    if flagged:
        wS, VS = np.linalg.eigh(Sx)
        for j in range(Sx.shape[0] - 1, -1, -1):
            if basis.shape[1] == u:
                break
            cand = VS[:, j]
            resid = cand - basis @ (basis.T @ cand)
            nr = np.linalg.norm(resid)
            if nr > 1e-8:
                basis = np.column_stack([basis, resid / nr])
        if basis.shape[1] < u:
            raise np.linalg.LinAlgError("could not complete initial basis")
    return basis, flagged


def pls_initializer(y, X, u):
    """Initial material subspace from partial least squares.

    Orthonormalizes the Krylov stack {S_xy, S_x S_xy, ...,
    S_x^{u-1} S_xy}, whose span is the u-component PLS weight space.  A
    numerically rank-deficient stack is padded with leading eigenvectors
    of S_x and flagged.  Deterministic for fixed input.
    """
    y, X = validate_xy(y, X)
    n, p = X.shape
    if not 1 <= u <= p:
        raise ValueError(f"u must be in 1..{p} (got {u})")
    xbar = X.mean(axis=0)
    Xc = X - xbar
    Sx = Xc.T @ Xc / n
    sxy = Xc.T @ (y - y.mean()) / n
    basis, flagged = _complete_basis(_krylov_stack(Sx, sxy, u), Sx, u)
    return _chart_from_basis(basis, flagged, label="pls")


def start_charts(y, X, u, slope=None):
    """Candidate starting charts for the subspace search.

    The quadratic form has local minima at wrong subspaces, and which
    cheap estimate lands nearest the right one depends on the data: the
    PLS span is best when cov(x, y) is informative, the eigenvector
    spans when the material directions carry large (or small) predictor
    variance.  Candidates, in fixed order:

    - PLS Krylov span of S_xy,
    - Krylov span of ``slope`` (a robust first-step coefficient),
    - top-u eigenvectors of S_x by eigenvalue,
    - u eigenvectors of S_x most aligned with ``slope``.

    Near-duplicate subspaces are dropped.  Deterministic for fixed
    input.
    """
    y, X = validate_xy(y, X)
    n, p = X.shape
    if not 1 <= u <= p:
        raise ValueError(f"u must be in 1..{p} (got {u})")
    xbar = X.mean(axis=0)
    Xc = X - xbar
    Sx = Xc.T @ Xc / n
    sxy = Xc.T @ (y - y.mean()) / n
    wS, VS = np.linalg.eigh(Sx)

    stacks = [("pls", _krylov_stack(Sx, sxy, u))]
    if slope is not None:
        slope = np.asarray(slope, dtype=float)
        stacks.append(("krylov-slope", _krylov_stack(Sx, slope, u)))
    stacks.append(("eig-top", VS[:, np.argsort(wS, kind="stable")[::-1][:u]]))
    if slope is not None:
        score = np.abs(VS.T @ slope)
        order = np.argsort(score, kind="stable")[::-1][:u]
        stacks.append(("eig-aligned", VS[:, order]))

    charts = []
    for label, K in stacks:
        basis, flagged = _complete_basis(K, Sx, u)
        if any(subspace_distance(basis, kept.basis) < 1e-8 for kept in charts):
            continue
        charts.append(_chart_from_basis(basis, flagged, label=label))
    return charts


def _cl_pack(S):
    # lower Cholesky, column-major lower triangle, log on the diagonal
    q = S.shape[0]
    if q == 0:
        return np.zeros(0)
    L = np.linalg.cholesky(S)
    rows, cols = vech_indices(q)
    v = L[rows, cols].copy()
    v[rows == cols] = np.log(v[rows == cols])
    return v


def _cl_unpack(v, q):
    if q == 0:
        return np.zeros((0, 0))
    rows, cols = vech_indices(q)
    w = v.copy()
    w[rows == cols] = np.exp(w[rows == cols])
    L = np.zeros((q, q))
    L[rows, cols] = w
    return L @ L.T


def pack_zeta(zeta):
    """Chart coordinates to a free optimization vector."""
    return np.concatenate([
        [zeta.mu], zeta.eta, zeta.A.ravel(),
        _cl_pack(zeta.omega), _cl_pack(zeta.omega0), zeta.mu_x,
    ])


def unpack_zeta(v, p, u, perm):
    """Inverse of :func:`pack_zeta` for a fixed permutation."""
    q = p - u
    su, sq = u * (u + 1) // 2, q * (q + 1) // 2
    off = np.cumsum([1, u, q * u, su, sq])
    return EnvelopeParams(
        mu=float(v[0]),
        eta=v[1:off[1]].copy(),
        A=v[off[1]:off[2]].reshape(q, u).copy(),
        omega=_cl_unpack(v[off[2]:off[3]], u),
        omega0=_cl_unpack(v[off[3]:off[4]], q),
        mu_x=v[off[4]:].copy(),
        perm=np.asarray(perm).copy(),
    )


def _step_vector(p, u, base=0.1, diag=0.05):
    q = p - u
    d = zeta_dim(p, u)
    steps = np.full(d, base)
    off = 1 + u + q * u
    ru, cu = vech_indices(u)
    steps[off:off + u * (u + 1) // 2][ru == cu] = diag
    off += u * (u + 1) // 2
    if q:
        rq, cq = vech_indices(q)
        steps[off:off + q * (q + 1) // 2][rq == cq] = diag
    return steps


def _make_objective(y, X, u, perm, delta, k):
    n, p = X.shape
    q = p - u
    rows, cols = vech_indices(p)
    ru, cu = vech_indices(u)
    diag_u = ru == cu
    rq, cq = vech_indices(q)
    diag_q = rq == cq
    su, sq = u * (u + 1) // 2, q * (q + 1) // 2
    off = np.cumsum([1, u, q * u, su, sq])
    head, tail = perm[:u], perm[u:]

    xbar = X.mean(axis=0)
    Xc = X - xbar
    Sx = Xc.T @ Xc / n
    vech_Sx = Sx[rows, cols]
    eye_u = np.eye(u)
    eye_q = np.eye(q)

    def objective(v):
        with np.errstate(over="ignore", invalid="ignore"):
            mu = v[0]
            eta = v[1:off[1]]
            A = v[off[1]:off[2]].reshape(q, u)

            lw = v[off[2]:off[3]].copy()
            lw[diag_u] = np.exp(lw[diag_u])
            Lw = np.zeros((u, u))
            Lw[ru, cu] = lw
            omega = Lw @ Lw.T

            G = np.empty((p, u))
            G[head] = eye_u
            G[tail] = A
            Sigma = G @ (omega @ G.T)
            if q:
                l0 = v[off[3]:off[4]].copy()
                l0[diag_q] = np.exp(l0[diag_q])
                L0 = np.zeros((q, q))
                L0[rq, cq] = l0
                omega0 = L0 @ L0.T
                G0 = np.empty((p, q))
                G0[head] = -A.T
                G0[tail] = eye_q
                Sigma = Sigma + G0 @ (omega0 @ G0.T)
            mu_x = v[off[4]:]

            beta = G @ eta
            psi = np.clip(y - mu - X @ beta, -k, k)
            g1 = np.empty(p + 1)
            g1[0] = psi.mean()
            g1[1:] = psi @ X / n
            d = xbar - mu_x
            g2 = Sigma[rows, cols] - vech_Sx - d[rows] * d[cols]
            g = np.concatenate([g1, g2, -d])
            return g @ delta @ g

    return objective


@dataclass
class FitResult:
    """Constrained fit with covariance and solver diagnostics.

    ``avar`` is the asymptotic covariance of sqrt(n) (theta_hat -
    theta) in the (mu, beta, vech Sigma_x, mu_x) layout; divide by n
    for finite-sample standard errors.
    """

    params: NaturalParams
    zeta: EnvelopeParams
    canon: CanonicalParams
    u: int
    k: float
    n: int
    objective: float
    objective_init: float
    avar: np.ndarray
    nm_iterations: int
    nm_evals: int
    nm_converged: bool
    nm_restarts: int
    starts_tried: int
    start_used: str
    init_flagged: bool
    delta_cond: float
    delta_ridged: bool

    @property
    def mu(self):
        return self.params.mu

    @property
    def beta(self):
        return self.params.beta

    @property
    def theta(self):
        return self.params.to_vector()

    def standard_errors(self):
        """Per-component standard errors sqrt(diag(avar)/n)."""
        d = np.diag(self.avar).copy()
        d[d < 0] = 0.0
        return np.sqrt(d / self.n)


def _init_covariances(zeta_basis_A, perm, beta_h, Sx):
    G, G0 = build_basis(zeta_basis_A, perm)
    PG = np.linalg.solve(G.T @ G, G.T)
    eta0 = PG @ beta_h
    omega_i = PG @ Sx @ PG.T
    if G0.shape[1]:
        P0 = np.linalg.solve(G0.T @ G0, G0.T)
        omega0_i = P0 @ Sx @ P0.T
    else:
        omega0_i = np.zeros((0, 0))
    return eta0, 0.5 * (omega_i + omega_i.T), 0.5 * (omega0_i + omega0_i.T)


def _fit_envelope(y, X, u, k, ftol=1e-10, xtol=0.0, max_iter=None,
                  restarts=2, starts=4, init_basis=None):
    y, X = validate_xy(y, X)
    n, p = X.shape
    if not 1 <= u <= p:
        raise ValueError(f"u must be in 1..{p} (got {u})")
    if max_iter is None:
        # estimates plateau well before the f-spread tolerance can bind in
        # high dimension; 200 d iterations is past the plateau with margin
        max_iter = 200 * zeta_dim(p, u)
    if k is None:
        k = select_k(y, X)
    gee = gee_solution(y, X, k=k)
    wm = weight_matrix(y, X, gee)

    if init_basis is not None:
        B = np.asarray(init_basis, dtype=float)
        if B.shape != (p, u):
            raise ValueError(f"init_basis must be {p} x {u}, got {B.shape}")
        Q, _ = np.linalg.qr(B)
        charts = [_chart_from_basis(Q, label="user")]
    else:
        charts = start_charts(y, X, u, gee.beta)

    # one search per candidate chart, sharing the iteration budget; the
    # start value only sets the running order -- it is a poor predictor
    # of the basin reached, so every candidate gets a search
    runs = []
    for ib in charts:
        eta0, om0, om00 = _init_covariances(ib.A, ib.perm, gee.beta,
                                            gee.sigma_x)
        zeta0 = EnvelopeParams(mu=gee.mu, eta=eta0, A=ib.A, omega=om0,
                               omega0=om00, mu_x=gee.mu_x.copy(),
                               perm=ib.perm)
        v0 = pack_zeta(zeta0)
        objective = _make_objective(y, X, u, ib.perm, wm.delta, k)
        runs.append((float(objective(v0)), ib, v0, objective))
    order = np.argsort([r[0] for r in runs], kind="stable")[:max(1, starts)]

    step = _step_vector(p, u)
    best = None
    total_iter = total_evals = 0
    remaining = max_iter
    for rank, idx in enumerate(order):
        f0, ib, v0, objective = runs[idx]
        share = remaining if rank == len(order) - 1 else \
            max(1, remaining // (len(order) - rank))
        nm = nelder_mead(objective, v0, step=step, ftol=ftol, xtol=xtol,
                         max_iter=share, restarts=restarts)
        total_iter += nm.iterations
        total_evals += nm.evals
        remaining -= nm.iterations
        if best is None or nm.fun < best[0].fun:
            best = (nm, ib, f0)
        if remaining <= 0:
            break

    nm, ib, f0 = best
    zeta_hat = unpack_zeta(nm.x, p, u, ib.perm)
    canon = canonicalize(zeta_hat)
    params = env_map(zeta_hat)
    avar = fit_avar(y, X, gee, canon)
    return FitResult(params=params, zeta=zeta_hat, canon=canon, u=u, k=k,
                     n=n, objective=nm.fun, objective_init=f0, avar=avar,
                     nm_iterations=total_iter, nm_evals=total_evals,
                     nm_converged=nm.converged, nm_restarts=nm.restarts_used,
                     starts_tried=len(order), start_used=ib.label,
                     init_flagged=ib.flagged, delta_cond=wm.cond,
                     delta_ridged=wm.ridged)


def fit_ehr(y, X, u, k=None, **opts):
    """Envelope-constrained Huber fit.

    Parameters
    ----------
    y, X : sample arrays.
    u : int
        Envelope dimension, 1 <= u <= p.
    k : float, optional
        Huber cutoff; rule-of-thumb selection from the full sample when
        omitted.
    **opts
        Optimizer overrides: ftol, xtol, max_iter, restarts, starts
        (number of candidate subspaces searched from, best final value
        kept; all candidates by default), init_basis (a p x u array
        replacing the candidate set).
    """
    return _fit_envelope(y, X, u, k, **opts)


def fit_env_ls(y, X, u, **opts):
    """Envelope fit with the identity score (least-squares moments).

    The infinite-cutoff limit of :func:`fit_ehr`: same moment stack and
    weighting with psi(r) = r.  This is a moment-based baseline, not the
    normal-likelihood envelope estimator, but has the same population
    target under the model.
    """
    return _fit_envelope(y, X, u, np.inf, **opts)
