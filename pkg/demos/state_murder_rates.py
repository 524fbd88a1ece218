"""Murder-rate regression on the 1977 US state facts data.

Standardizes the seven predictors, cross-validates the envelope
dimension, fits the enveloped Huber regression there, and contrasts
its bootstrap slope SDs with plain Huber regression.  B = 50 keeps
this a short run; the CLI equivalent with B = 200:

    envhuber fit --data src/envhuber/data/statex77.csv \\
        --response Murder --standardize --bootstrap 200
"""

import numpy as np

from envhuber.datasets import load_statex77, standardize_predictors
from envhuber.gmm import fit_ehr
from envhuber.selection import bootstrap_se, cv_select_u


def main():
    tab = load_statex77()
    X, scales = standardize_predictors(tab.X)
    y = tab.y

    cv = cv_select_u(y, X, estimator="ehr", folds=5, seed=0)
    print("held-out loss by dimension:")
    for u, v in zip(cv.u_values, cv.cv_values):
        marker = "  <- selected" if u == cv.u_best else ""
        print(f"  u = {u}: {v:.4f}{marker}")

    fit = fit_ehr(y, X, u=cv.u_best)
    ehr = bootstrap_se(y, X, estimator="ehr", u=cv.u_best, B=50, seed=0)
    hr = bootstrap_se(y, X, estimator="hr", B=50, seed=0)

    print(f"\nslopes at u = {cv.u_best} (standardized predictors):")
    print(f"{'predictor':>12} {'ehr':>8} {'sd(ehr)':>8} {'sd(hr)':>8}")
    for j, name in enumerate(tab.features):
        print(f"{name:>12} {fit.beta[j]:8.3f} "
              f"{ehr.sd_beta[j]:8.3f} {hr.sd_beta[j]:8.3f}")
    print(f"\naverage sd(hr)/sd(ehr): "
          f"{np.mean(hr.sd_beta / ehr.sd_beta):.2f}")


if __name__ == "__main__":
    main()
