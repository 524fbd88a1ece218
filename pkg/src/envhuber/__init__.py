"""Huber regression with an estimated immaterial predictor subspace.

The estimator removes the predictor directions that carry no signal for
the response by constraining the slope vector and the predictor
covariance to a common low-dimensional material subspace (an envelope),
and fits the constrained model by two-step GMM built on Huber
estimating equations.  See the README for the method summary, the CLI,
and the simulation harness.
"""

from .asymptotics import (ERROR_DISTRIBUTIONS, ErrorDistribution,
                          closed_form_slope_avar, fit_avar, huber_factor,
                          known_gamma_avar, population_k, projected_avar,
                          sandwich_avar)
from .datasets import (DataError, TableData, ingest_csv, load_statex77,
                       standardize_predictors, statex77_path)
from .envelope import (CanonicalParams, EnvelopeParams, NaturalParams,
                       build_basis, canonicalize, env_map, jacobian_psi1,
                       theta_dim, zeta_dim)
from .gmm import (FitResult, fit_ehr, fit_env_ls, gmm_objective, moment_g,
                  pls_initializer, sample_moment, start_charts,
                  weight_matrix)
from .huber import (GeeSolution, LinearFit, gee_solution, huber_fit,
                    huber_loss, huber_psi, huber_psi_prime, median_fit,
                    ols_fit, select_k)
from .linalg import (contraction_matrix, expansion_matrix,
                     orthonormal_complement, subspace_distance, sym_pinv,
                     unvech, vech)
from .optimize import NMResult, nelder_mead
from .selection import (BootstrapReport, CvReport, bootstrap_se, cv_select_u)
from .simulation import (SimScenario, SimTruth, build_truth, gen_dataset,
                         gen_errors, load_scenario, parse_scenario,
                         run_scenario)

__version__ = "0.1.0"
