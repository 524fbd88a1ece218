"""Derivative-free minimization by the Nelder-Mead simplex method.

Standard coefficients (reflection 1, expansion 2, contraction 0.5,
shrink 0.5) with optional restarts that rebuild the simplex around the
incumbent at half the previous edge length.  Non-finite objective
values are treated as +inf, which keeps the simplex inside the feasible
region when the objective encodes constraints that way.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["NMResult", "nelder_mead"]


@dataclass
class NMResult:
    x: np.ndarray
    fun: float
    iterations: int
    evals: int
    converged: bool
    restarts_used: int


def _guard(f):
    def g(x):
        v = float(f(x))
        return v if np.isfinite(v) else np.inf
    return g


def _run_simplex(f, x0, f0, step, ftol, xtol, max_iter, counter):
    d = x0.shape[0]
    sim = np.empty((d + 1, d))
    fsim = np.empty(d + 1)
    sim[0] = x0
    fsim[0] = f0
    for i in range(d):
        v = x0.copy()
        v[i] += step[i]
        sim[i + 1] = v
        fsim[i + 1] = f(v)
    counter[1] += d

    it = 0
    converged = False
    while it < max_iter:
        order = np.argsort(fsim, kind="stable")
        sim = sim[order]
        fsim = fsim[order]
        fspread = fsim[-1] - fsim[0]
        if fspread <= ftol and np.isfinite(fspread):
            converged = True
            break
        if xtol > 0 and np.max(np.abs(sim[1:] - sim[0])) <= xtol:
            converged = True
            break
        it += 1

        centroid = sim[:-1].mean(axis=0)
        xr = centroid + (centroid - sim[-1])
        fr = f(xr)
        counter[1] += 1
        if fr < fsim[0]:
            xe = centroid + 2.0 * (centroid - sim[-1])
            fe = f(xe)
            counter[1] += 1
            if fe < fr:
                sim[-1], fsim[-1] = xe, fe
            else:
                sim[-1], fsim[-1] = xr, fr
        elif fr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fr
        else:
            shrink = False
            if fr < fsim[-1]:  # outside contraction
                xc = centroid + 0.5 * (xr - centroid)
                fc = f(xc)
                counter[1] += 1
                if fc <= fr:
                    sim[-1], fsim[-1] = xc, fc
                else:
                    shrink = True
            else:  # inside contraction
                xc = centroid - 0.5 * (centroid - sim[-1])
                fc = f(xc)
                counter[1] += 1
                if fc < fsim[-1]:
                    sim[-1], fsim[-1] = xc, fc
                else:
                    shrink = True
            if shrink:
                best = sim[0]
                for i in range(1, d + 1):
                    sim[i] = best + 0.5 * (sim[i] - best)
                    fsim[i] = f(sim[i])
                counter[1] += d
    counter[0] += it
    best = int(np.argmin(fsim))
    return sim[best].copy(), float(fsim[best]), converged


def nelder_mead(f, x0, step=0.1, ftol=1e-10, xtol=0.0, max_iter=None,
                restarts=0):
    """Minimize ``f`` from ``x0``.

    Parameters
    ----------
    f : callable
        Objective mapping a (d,) vector to a scalar.
    x0 : (d,) array_like
        Starting point.
    step : float or (d,) array_like
        Initial simplex edge length per coordinate.
    ftol : float
        Convergence when the simplex function spread falls below this.
    xtol : float
        Convergence when the simplex diameter (inf norm) falls below
        this; 0 disables the check.
    max_iter : int or None
        Total iteration budget across restarts; default 2000 * d.
        ``max_iter=0`` returns ``x0`` after a single evaluation.
    restarts : int
        Number of times to rebuild the simplex at the incumbent with
        halved steps after convergence or budget slice exhaustion.
    """
    x0 = np.asarray(x0, dtype=float).copy()
    d = x0.shape[0]
    if d == 0:
        raise ValueError("x0 must have at least one coordinate")
    step = np.broadcast_to(np.asarray(step, dtype=float), (d,)).copy()
    if np.any(step == 0):
        raise ValueError("step must be nonzero in every coordinate")
    if max_iter is None:
        max_iter = 2000 * d
    fg = _guard(f)
    f0 = fg(x0)
    counter = [0, 1]  # iterations, evaluations
    if max_iter == 0:
        return NMResult(x=x0, fun=f0, iterations=0, evals=1,
                        converged=False, restarts_used=0)

    # budget split evenly across restart legs; early convergence rolls the
    # unused share forward
    x, fx = x0, f0
    converged = False
    used = 0
    legs = restarts + 1
    for r in range(legs):
        remaining = max_iter - counter[0]
        if remaining <= 0:
            break
        budget = remaining if r == legs - 1 else max(1, remaining // (legs - r))
        used = r
        x, fx, converged = _run_simplex(fg, x, fx, step * (0.5 ** r),
                                        ftol, xtol, budget, counter)
    return NMResult(x=x, fun=fx, iterations=counter[0], evals=counter[1],
                    converged=converged, restarts_used=used)
