"""Monte Carlo harness: synthetic truth, data generation, scenario runs.

The default truth has a two-dimensional material subspace buried in
twelve predictors: the subspace directions carry variances 9 and 100,
the complement is isotropic with variance 1, and every slope equals
0.1.  Scenario files are flat ``key = value`` text; see
:func:`parse_scenario` for the keys.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import ERROR_DISTRIBUTIONS
from .gmm import fit_ehr, fit_env_ls
from .huber import gee_solution, ols_fit
from .linalg import orthonormal_complement
from .selection import RNG_ALGORITHM, _pmap, cv_select_u

__all__ = [
    "SimTruth",
    "build_truth",
    "gen_errors",
    "gen_dataset",
    "SimScenario",
    "parse_scenario",
    "load_scenario",
    "EstimatorStats",
    "SimResult",
    "run_scenario",
]

SCALE_KINDS = ("none", "additive", "multiplicative")
ESTIMATORS = ("ehr", "env", "hr", "ls")
U_POLICIES = ("fixed-true", "cv")


@dataclass
class SimTruth:
    """Population parameters of the synthetic design."""

    p: int
    u: int
    mu: float
    eta: np.ndarray
    gamma: np.ndarray
    gamma0: np.ndarray
    omega: np.ndarray
    omega0: np.ndarray
    beta: np.ndarray
    sigma_x: np.ndarray
    sigma_x_sqrt: np.ndarray = field(repr=False)
    mu_x: np.ndarray = field(repr=False)


def build_truth(p=12, u=2):
    """Construct the synthetic truth for any u dividing p.

    Basis column j collects rows {i : i mod u == j} with entries
    -1/sqrt(p/u); material variances are log-spaced from 9 to 100 (so
    (9, 100) at u = 2), the complement is isotropic, and eta is scaled
    so every coordinate of beta equals 0.1.
    """
    if p % u != 0 or not 1 <= u <= p:
        raise ValueError(f"u must divide p (got p={p}, u={u})")
    c = math.sqrt(p / u)
    G = np.zeros((p, u))
    G[np.arange(p), np.arange(p) % u] = -1.0 / c
    eta = -0.1 * c * np.ones(u)
    omega = np.diag(np.geomspace(9.0, 100.0, u))
    G0 = orthonormal_complement(G) if u < p else np.zeros((p, 0))
    omega0 = np.eye(p - u)
    sigma_x = G @ omega @ G.T + G0 @ G0.T
    sigma_x = 0.5 * (sigma_x + sigma_x.T)
    w, V = np.linalg.eigh(sigma_x)
    sqrt = (V * np.sqrt(np.maximum(w, 0.0))) @ V.T
    return SimTruth(p=p, u=u, mu=5.0, eta=eta, gamma=G, gamma0=G0,
                    omega=omega, omega0=omega0, beta=G @ eta,
                    sigma_x=sigma_x, sigma_x_sqrt=sqrt, mu_x=np.zeros(p))


def gen_errors(name, n, rng):
    """Draw n errors from a named reference law."""
    return ERROR_DISTRIBUTIONS[name].sample(rng, n)


def _scale_values(kind, X):
    if kind == "none":
        return 1.0
    if kind == "additive":
        return X[:, 0] + X[:, -1]
    if kind == "multiplicative":
        return X[:, 0] * X[:, -1]
    raise ValueError(f"unknown scale kind {kind!r}")


def gen_dataset(truth, n, error="normal", scale="none", seed=0, rep=0):
    """One replicate: predictors first, then errors, from stream (seed, rep).

    Predictors are normal with the truth's covariance via its symmetric
    square root; heteroscedastic kinds multiply the error by a function
    of the first and last predictor.
    """
    rng = np.random.default_rng([seed, rep])
    Z = rng.standard_normal((n, truth.p))
    X = truth.mu_x + Z @ truth.sigma_x_sqrt
    eps = gen_errors(error, n, rng)
    y = truth.mu + X @ truth.beta + _scale_values(scale, X) * eps
    return y, X


@dataclass
class SimScenario:
    p: int = 12
    u: int = 2
    n: int = 500
    error: str = "normal"
    scale: str = "none"
    reps: int = 20
    seed: int = 0
    estimators: tuple = ESTIMATORS
    u_policy: str = "fixed-true"

    def to_dict(self):
        return {
            "p": self.p, "u": self.u, "n": self.n, "error": self.error,
            "scale": self.scale, "reps": self.reps, "seed": self.seed,
            "estimators": list(self.estimators), "u_policy": self.u_policy,
        }


_INT_KEYS = ("p", "u", "n", "reps", "seed")


def parse_scenario(text):
    """Parse flat ``key = value`` scenario text.

    Keys: p, u, n, error, scale, reps, seed, estimators (comma list
    from ehr/env/hr/ls), u_policy (fixed-true or cv).  '#' starts a
    comment; unknown keys are errors.
    """
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"scenario line {lineno}: expected key = value")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in fields:
            raise ValueError(f"scenario line {lineno}: duplicate key {key!r}")
        fields[key] = val

    scn = SimScenario()
    for key, val in fields.items():
        if key in _INT_KEYS:
            try:
                setattr(scn, key, int(val))
            except ValueError:
                raise ValueError(f"scenario key {key!r}: not an integer: {val!r}")
        elif key == "error":
            if val not in ERROR_DISTRIBUTIONS:
                raise ValueError(f"unknown error law {val!r}")
            scn.error = val
        elif key == "scale":
            if val not in SCALE_KINDS:
                raise ValueError(f"unknown scale kind {val!r}")
            scn.scale = val
        elif key == "estimators":
            ests = tuple(e.strip() for e in val.split(",") if e.strip())
            bad = [e for e in ests if e not in ESTIMATORS]
            if bad or not ests:
                raise ValueError(f"invalid estimators {val!r}")
            scn.estimators = ests
        elif key == "u_policy":
            if val not in U_POLICIES:
                raise ValueError(f"unknown u_policy {val!r}")
            scn.u_policy = val
        else:
            raise ValueError(f"unknown scenario key {key!r}")
    if scn.p < 2 or not 1 <= scn.u <= scn.p or scn.p % scn.u:
        raise ValueError(f"invalid dimensions p={scn.p}, u={scn.u}")
    if scn.n <= scn.p + 1 or scn.reps < 1:
        raise ValueError("need n > p + 1 and reps >= 1")
    return scn


def load_scenario(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


@dataclass
class EstimatorStats:
    estimator: str
    losses: list
    u_selected: list
    failures: int
    cv_freq: object  # fraction of reps selecting the true u, or None

    @property
    def mean_loss(self):
        return float(np.mean(self.losses)) if self.losses else math.nan

    @property
    def se_loss(self):
        if len(self.losses) < 2:
            return math.nan
        return float(np.std(self.losses, ddof=1) / math.sqrt(len(self.losses)))

    @property
    def median_loss(self):
        return float(np.median(self.losses)) if self.losses else math.nan


@dataclass
class SimResult:
    scenario: SimScenario
    stats: dict

    def to_dict(self):
        return {
            "scenario": self.scenario.to_dict(),
            "rng": RNG_ALGORITHM,
            "results": {
                name: {
                    "mean_loss": st.mean_loss,
                    "se_loss": st.se_loss,
                    "median_loss": st.median_loss,
                    "reps_ok": len(st.losses),
                    "failures": st.failures,
                    "cv_freq": st.cv_freq,
                    "losses": [float(v) for v in st.losses],
                    "u_selected": list(st.u_selected),
                }
                for name, st in self.stats.items()
            },
        }

    def to_csv(self):
        lines = ["estimator,mean_loss,se_loss,median_loss,reps_ok,failures,cv_freq"]
        for name, st in self.stats.items():
            cv = "" if st.cv_freq is None else f"{st.cv_freq:.17g}"
            lines.append(
                f"{name},{st.mean_loss:.17g},{st.se_loss:.17g},"
                f"{st.median_loss:.17g},{len(st.losses)},{st.failures},{cv}")
        return "\n".join(lines) + "\n"


_SIM_FAILURE = (np.linalg.LinAlgError, ValueError, FloatingPointError)


def _run_rep(args):
    scn, truth, rep, fit_opts = args
    y, X = gen_dataset(truth, scn.n, scn.error, scn.scale, scn.seed, rep)
    out = {}
    for est in scn.estimators:
        try:
            u_used = None
            if est in ("ehr", "env"):
                if scn.u_policy == "cv":
                    cv = cv_select_u(y, X, estimator=est,
                                     seed=[scn.seed, rep, 1],
                                     fit_opts=fit_opts)
                    u_used = cv.u_best
                else:
                    u_used = truth.u
                fit = (fit_ehr if est == "ehr" else fit_env_ls)(
                    y, X, u_used, **(fit_opts or {}))
                beta = fit.beta
            elif est == "hr":
                beta = gee_solution(y, X).beta
            else:
                beta = ols_fit(y, X).beta
            loss = float(np.sum((beta - truth.beta) ** 2))
            out[est] = (loss, u_used)
        except _SIM_FAILURE:
            out[est] = None
    return out


def run_scenario(scn, workers=1, fit_opts=None):
    """Run all replicates of a scenario and aggregate per-estimator losses.

    Loss per replicate is the squared error ||beta_hat - beta||^2.
    Replicate r uses the data stream (seed, r) regardless of worker
    count, so results are independent of scheduling.  Failed replicates
    are dropped from the averages and counted.
    """
    truth = build_truth(scn.p, scn.u)
    rep_results = _pmap(_run_rep,
                        [(scn, truth, r, fit_opts) for r in range(scn.reps)],
                        workers)
    stats = {}
    for est in scn.estimators:
        losses, u_sel, failures = [], [], 0
        for rr in rep_results:
            cell = rr[est]
            if cell is None:
                failures += 1
                continue
            losses.append(cell[0])
            if cell[1] is not None:
                u_sel.append(int(cell[1]))
        cv_freq = None
        if scn.u_policy == "cv" and est in ("ehr", "env") and u_sel:
            cv_freq = float(np.mean([u == scn.u for u in u_sel]))
        stats[est] = EstimatorStats(estimator=est, losses=losses,
                                    u_selected=u_sel, failures=failures,
                                    cv_freq=cv_freq)
    return SimResult(scenario=scn, stats=stats)
