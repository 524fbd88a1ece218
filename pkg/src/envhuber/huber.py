"""Huber scoring, robust line fits, and the unconstrained moment solution.

All fitters take a response vector ``y`` (n,) and predictor matrix ``X``
(n, p) and model an intercept separately from the slope vector.  The
cutoff ``k`` may be ``np.inf``, in which case the Huber loss, score and
fits all reduce to their least-squares counterparts; the rest of the
package uses that limit as the non-robust baseline.
"""

from dataclasses import dataclass, field

import numpy as np

from .envelope import NaturalParams

__all__ = [
    "huber_loss",
    "huber_psi",
    "huber_psi_prime",
    "validate_xy",
    "LinearFit",
    "ols_fit",
    "median_fit",
    "select_k",
    "huber_fit",
    "GeeSolution",
    "gee_solution",
]

MAD_NORMALIZER = 0.6745  # rule-of-thumb denominator: MAD of N(0,1) to 4 digits


def huber_loss(r, k):
    """Huber loss: r^2/2 inside +-k, linear with matched value/slope outside."""
    r = np.asarray(r, dtype=float)
    if np.isinf(k):
        return 0.5 * r * r
    a = np.abs(r)
    return np.where(a <= k, 0.5 * r * r, k * a - 0.5 * k * k)


def huber_psi(r, k):
    """Huber score, the loss derivative: r clamped to [-k, k] (inclusive)."""
    return np.clip(np.asarray(r, dtype=float), -k, k)


def huber_psi_prime(r, k):
    """Derivative of the score: indicator of |r| <= k."""
    r = np.asarray(r, dtype=float)
    return (np.abs(r) <= k).astype(float)


def validate_xy(y, X):
    """Check a regression sample and return it as float arrays.

    Requires finite values, n > p + 1, and [1, X] of full column rank so
    every fitter downstream has a well-posed normal equation.
    """
    y = np.asarray(y, dtype=float).ravel()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, p = X.shape
    if y.shape[0] != n:
        raise ValueError(f"y has {y.shape[0]} rows but X has {n}")
    if n <= p + 1:
        raise ValueError(f"need n > p + 1 (got n={n}, p={p})")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
        raise ValueError("non-finite values in the sample")
    W = np.column_stack([np.ones(n), X])
    if np.linalg.matrix_rank(W) < p + 1:
        raise np.linalg.LinAlgError("[1, X] is column rank deficient")
    return y, X


@dataclass
class LinearFit:
    """Intercept/slope estimate plus solver metadata."""

    mu: float
    beta: np.ndarray
    objective: float
    iterations: int = 0
    converged: bool = True

    def predict(self, X):
        return self.mu + np.asarray(X, dtype=float) @ self.beta

    def residuals(self, y, X):
        return np.asarray(y, dtype=float) - self.predict(X)


def _wls(W, y, weights):
    # weighted normal equations; W is [1, X]
    Ww = W * weights[:, None]
    return np.linalg.solve(W.T @ Ww, Ww.T @ y)


def ols_fit(y, X):
    """Least-squares fit, rejecting rank-deficient designs."""
    y, X = validate_xy(y, X)
    n = y.shape[0]
    W = np.column_stack([np.ones(n), X])
    coef, _, rank, _ = np.linalg.lstsq(W, y, rcond=None)
    if rank < W.shape[1]:
        raise np.linalg.LinAlgError("design matrix is rank deficient")
    r = y - W @ coef
    return LinearFit(mu=float(coef[0]), beta=coef[1:].copy(),
                     objective=float(0.5 * r @ r))


def median_fit(y, X, max_iter=500, tol=1e-10):
    """Approximate least-absolute-deviations fit by smoothed IRLS.

    The absolute value is smoothed with a floor delta = 1e-6 * scale(y)
    on |r|, which bounds the IRLS weights; the returned coefficients are
    the visited iterate with the smallest L1 objective, so the result is
    never worse than the least-squares start.
    """
    y, X = validate_xy(y, X)
    n = y.shape[0]
    W = np.column_stack([np.ones(n), X])
    scale = np.std(y)
    delta = 1e-6 * scale if scale > 0 else 1e-12

    coef = np.linalg.lstsq(W, y, rcond=None)[0]
    best = coef.copy()
    best_obj = float(np.abs(y - W @ coef).sum())
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = y - W @ coef
        w = 1.0 / np.maximum(np.abs(r), delta)
        new = _wls(W, y, w)
        obj = float(np.abs(y - W @ new).sum())
        if obj < best_obj:
            best_obj = obj
            best = new.copy()
        if np.max(np.abs(new - coef)) < tol:
            coef = new
            converged = True
            break
        coef = new
    return LinearFit(mu=float(best[0]), beta=best[1:].copy(),
                     objective=best_obj, iterations=it, converged=converged)


def select_k(y, X):
    """Rule-of-thumb Huber cutoff from median-regression residuals.

    k = 1.345 * median(|r|) / 0.6745 with r the residuals of an L1 fit,
    so that k approaches 1.345 when the errors are standard normal.
    """
    y, X = validate_xy(y, X)
    med = median_fit(y, X)
    mad = float(np.median(np.abs(med.residuals(y, X))))
    # exact fits leave rounding-level residuals, not literal zeros
    scale = float(np.median(np.abs(y - np.median(y)))) or 1.0
    if mad <= 1e-12 * scale:
        raise np.linalg.LinAlgError("zero residual MAD; cutoff selection degenerate")
    return 1.345 * mad / MAD_NORMALIZER


def huber_fit(y, X, k, init=None, max_iter=200, tol=1e-10):
    """Huber-loss fit by IRLS with weights min(1, k/|r|).

    The weight step is the standard majorize-minimize update, so the
    objective is non-increasing across iterations.  ``init`` may carry a
    (p+1,) coefficient vector (intercept first); least squares is the
    default start.  ``k = np.inf`` reproduces the least-squares fit.
    """
    y, X = validate_xy(y, X)
    if not k > 0:
        raise ValueError(f"cutoff k must be positive (got {k})")
    n = y.shape[0]
    W = np.column_stack([np.ones(n), X])
    if init is None:
        coef = np.linalg.lstsq(W, y, rcond=None)[0]
    else:
        coef = np.asarray(init, dtype=float).copy()

    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = y - W @ coef
        if np.isinf(k):
            new = np.linalg.lstsq(W, y, rcond=None)[0]
        else:
            w = np.minimum(1.0, k / np.maximum(np.abs(r), 1e-300))
            new = _wls(W, y, w)
        delta = np.max(np.abs(new - coef))
        coef = new
        if delta < tol:
            converged = True
            break
    r = y - W @ coef
    return LinearFit(mu=float(coef[0]), beta=coef[1:].copy(),
                     objective=float(huber_loss(r, k).sum()),
                     iterations=it, converged=converged)


@dataclass
class GeeSolution:
    """Unconstrained estimating-equation solution.

    Bundles the Huber location/slope fit with the first two predictor
    moments (covariance with divisor n), which together zero the sample
    moment vector used by the constrained fit.
    """

    mu: float
    beta: np.ndarray
    sigma_x: np.ndarray
    mu_x: np.ndarray
    k: float
    fit: LinearFit = field(repr=False)

    @property
    def params(self):
        return NaturalParams(mu=self.mu, beta=self.beta,
                             sigma_x=self.sigma_x, mu_x=self.mu_x)

    @property
    def theta(self):
        return self.params.to_vector()


def gee_solution(y, X, k=None):
    """Solve the unconstrained moment conditions.

    Huber fit for (mu, beta) at cutoff ``k`` (rule-of-thumb selection
    when omitted), sample mean and divisor-n covariance for the
    predictor blocks.
    """
    y, X = validate_xy(y, X)
    if k is None:
        k = select_k(y, X)
    fit = huber_fit(y, X, k)
    xbar = X.mean(axis=0)
    Xc = X - xbar
    Sx = (Xc.T @ Xc) / X.shape[0]
    return GeeSolution(mu=fit.mu, beta=fit.beta, sigma_x=Sx, mu_x=xbar,
                       k=k, fit=fit)
