"""Robust domain adaptation via pessimistic contrastive risk minimization.

Classifiers adapt to an unlabeled target sample set while guaranteeing,
for every possible labeling of those samples, a target risk no worse
than the unadapted source model's. Least-squares and discriminant
analysis (shared or per-class covariance) model families are provided,
along with the experimental apparatus: biased subsampling, maximum mean
discrepancy, ROC AUC and risk reports.
"""

from .data import Dataset, augment_bias, load_csv, one_hot, write_csv
from .discriminant import (
    GaussianParams,
    da_risk,
    da_worst_case_contrast,
    fit_da,
    fit_tcp_da,
    predict_da,
    regularize_cov,
    tcp_da_grad_q,
    tcp_da_objective,
)
from .least_squares import (
    LinearParams,
    fit_ls,
    fit_tcp_ls,
    ls_risk,
    ls_scores,
    ls_worst_case_contrast,
    tcp_ls_grad_q,
    tcp_ls_objective,
)
from .metrics import RiskReport, auc, mmd_rbf, target_risk_report
from .sampling import (
    BiasSampleSpec,
    class_priors,
    mahalanobis_sq,
    sample_biased,
)
from .simplex import HAVE_COMPILED_KERNEL, project_rows, project_simplex
from .solver import SaddleResult, SolverOptions, solve_saddle

__version__ = "0.1.0"

__all__ = [
    "BiasSampleSpec",
    "Dataset",
    "GaussianParams",
    "HAVE_COMPILED_KERNEL",
    "LinearParams",
    "RiskReport",
    "SaddleResult",
    "SolverOptions",
    "auc",
    "augment_bias",
    "class_priors",
    "da_risk",
    "da_worst_case_contrast",
    "fit_da",
    "fit_ls",
    "fit_tcp_da",
    "fit_tcp_ls",
    "load_csv",
    "ls_risk",
    "ls_scores",
    "ls_worst_case_contrast",
    "mahalanobis_sq",
    "mmd_rbf",
    "one_hot",
    "predict_da",
    "project_rows",
    "project_simplex",
    "regularize_cov",
    "sample_biased",
    "solve_saddle",
    "target_risk_report",
    "tcp_da_grad_q",
    "tcp_da_objective",
    "tcp_ls_grad_q",
    "tcp_ls_objective",
    "write_csv",
]
