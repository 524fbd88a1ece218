"""Dimension selection by cross-validation and pairs-bootstrap errors.

Randomness enters only through fold shuffling and resampling indices;
both run on numpy's PCG64 generator seeded explicitly, and replicate b
of a bootstrap draws from the stream seeded by (seed, b), so results do
not depend on execution order or worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .gmm import fit_ehr, fit_env_ls
from .huber import gee_solution, huber_loss, ols_fit, select_k, validate_xy

__all__ = [
    "CvReport",
    "cv_select_u",
    "BootstrapReport",
    "bootstrap_se",
    "RNG_ALGORITHM",
]

RNG_ALGORITHM = "numpy-PCG64"

_FAILURE = (np.linalg.LinAlgError, ValueError, FloatingPointError)


def _pmap(fn, items, workers):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _slope_fitter(estimator, u, fit_opts):
    opts = dict(fit_opts or {})
    if estimator == "ehr":
        return lambda y, X: fit_ehr(y, X, u, **opts)
    if estimator == "env":
        return lambda y, X: fit_env_ls(y, X, u, **opts)
    if estimator == "hr":
        return lambda y, X: gee_solution(y, X)
    if estimator == "ls":
        return lambda y, X: ols_fit(y, X)
    raise ValueError(f"unknown estimator {estimator!r}")


@dataclass
class CvReport:
    u_best: int
    u_values: list
    cv_values: np.ndarray
    folds: int
    seed: object
    k_eval: float
    fold_sizes: list
    failures: list = field(default_factory=list)

    def to_dict(self):
        return {
            "u_best": self.u_best,
            "u_values": list(self.u_values),
            "cv_values": [float(v) for v in self.cv_values],
            "folds": self.folds,
            "seed": self.seed,
            "rng": RNG_ALGORITHM,
            "k_eval": float(self.k_eval),
            "fold_sizes": list(self.fold_sizes),
            "failures": [list(f) for f in self.failures],
        }


def cv_select_u(y, X, estimator="ehr", folds=5, seed=0, u_values=None,
                fit_opts=None):
    """Pick the envelope dimension by K-fold prediction loss.

    Folds come from one seeded shuffle dealt round-robin and are shared
    across all candidate dimensions.  Held-out losses use the Huber loss
    at the full-sample cutoff for ``ehr`` and squared loss (the infinite
    cutoff) for ``env``; refits inside each fold select their own
    cutoff from the training part alone.  A dimension whose fold fit
    fails is excluded; ties go to the smaller dimension.
    """
    y, X = validate_xy(y, X)
    n, p = X.shape
    if not 2 <= folds <= n:
        raise ValueError(f"folds must be in 2..{n} (got {folds})")
    if u_values is None:
        u_values = list(range(1, min(p, 6) + 1))
    u_values = sorted(set(int(u) for u in u_values))
    if u_values[0] < 1 or u_values[-1] > p:
        raise ValueError(f"u_values must lie in 1..{p}")

    k_eval = np.inf if estimator == "env" else select_k(y, X)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    fold_id = np.empty(n, dtype=int)
    fold_id[order] = np.arange(n) % folds
    fold_sizes = [int(np.sum(fold_id == j)) for j in range(folds)]

    cv = np.full(len(u_values), np.inf)
    failures = []
    for ui, u in enumerate(u_values):
        fitter = _slope_fitter(estimator, u, fit_opts)
        total = 0.0
        ok = True
        for j in range(folds):
            hold = fold_id == j
            try:
                fit = fitter(y[~hold], X[~hold])
                r = y[hold] - fit.mu - X[hold] @ fit.beta
                total += float(huber_loss(r, k_eval).sum())
            except _FAILURE:
                failures.append((u, j))
                ok = False
                break
        if ok:
            cv[ui] = total / n
    if not np.any(np.isfinite(cv)):
        raise np.linalg.LinAlgError("every candidate dimension failed in CV")
    u_best = int(u_values[int(np.argmin(cv))])
    return CvReport(u_best=u_best, u_values=u_values, cv_values=cv,
                    folds=folds, seed=seed, k_eval=k_eval,
                    fold_sizes=fold_sizes, failures=failures)


@dataclass
class BootstrapReport:
    estimator: str
    u: object
    B: int
    seed: object
    mu_point: float
    beta_point: np.ndarray
    sd_mu: float
    sd_beta: np.ndarray
    successes: int
    failures: int
    flagged: bool

    def to_dict(self):
        return {
            "estimator": self.estimator,
            "u": self.u,
            "B": self.B,
            "seed": self.seed,
            "rng": RNG_ALGORITHM,
            "mu_point": float(self.mu_point),
            "beta_point": [float(b) for b in self.beta_point],
            "sd_mu": float(self.sd_mu),
            "sd_beta": [float(s) for s in self.sd_beta],
            "successes": self.successes,
            "failures": self.failures,
            "flagged": self.flagged,
        }


def bootstrap_se(y, X, estimator="ehr", u=None, B=200, seed=0, workers=1,
                 fit_opts=None):
    """Pairs-bootstrap standard deviations of the slope estimate.

    Rows are resampled with replacement; every replicate reruns the full
    pipeline (cutoff selection included) at the fixed dimension ``u``.
    Replicates that fail numerically are dropped and counted, and the
    report is flagged when more than 10 percent fail.  Standard
    deviations use divisor (#successes - 1).
    """
    y, X = validate_xy(y, X)
    n, p = X.shape
    if estimator in ("ehr", "env") and u is None:
        raise ValueError("u is required for envelope estimators")
    if B < 2:
        raise ValueError("B must be at least 2")
    fitter = _slope_fitter(estimator, u, fit_opts)
    point = fitter(y, X)

    def one(b):
        idx = np.random.default_rng([seed, b]).integers(0, n, size=n)
        try:
            fit = fitter(y[idx], X[idx])
            return np.concatenate([[fit.mu], fit.beta])
        except _FAILURE:
            return None

    draws = [d for d in _pmap(one, range(B), workers) if d is not None]
    successes = len(draws)
    failures = B - successes
    if successes < 2:
        raise np.linalg.LinAlgError(
            f"only {successes} bootstrap replicates succeeded")
    x = np.vstack(draws)
    sd = x.std(axis=0, ddof=1)
    return BootstrapReport(
        estimator=estimator, u=u, B=B, seed=seed,
        mu_point=float(point.mu), beta_point=np.asarray(point.beta),
        sd_mu=float(sd[0]), sd_beta=sd[1:], successes=successes,
        failures=failures, flagged=failures > 0.10 * B)
