"""Experiment orchestration: lambda cross-validation on held-out source
data, the biased-subsampling protocol and pairwise domain transfer.

Target labels are never seen by any fitting step; they enter only the
final risk and AUC evaluation.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, one_hot
from .discriminant import da_risk, fit_da, fit_tcp_da, log_joint_scores
from .least_squares import fit_ls, fit_tcp_ls, ls_risk, ls_scores
from .metrics import auc, mmd_rbf, target_risk_report
from .sampling import BiasSampleSpec, sample_biased
from .solver import SolverOptions

# regularization grid used when none is configured
LAMBDA_GRID = (0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3)

MODELS = ("ls", "lda", "qda")


@dataclass
class ExperimentConfig:
    model: str = "lda"
    lambda_grid: tuple = LAMBDA_GRID
    cv_folds: int = 5
    n_source: int = 50
    rng_seed: int = 0
    repeats: int = 1
    solver: SolverOptions | None = None
    alpha0: float | None = None
    epsilon: float = 1e-9
    max_iter: int = 5000
    schedule: str = "inverse_t"
    fixed_lambda: float | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if len(self.lambda_grid) == 0:
            raise ValueError("lambda_grid must be nonempty")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")

    def solver_opts(self, m: int) -> SolverOptions:
        """Solver options for a target of size m.

        Unless alpha0 is set explicitly the first step size is m, which
        cancels the 1/m scale of the contrast gradients; the later decay
        then drives convergence.
        """
        if self.solver is not None:
            return self.solver
        alpha0 = float(m) if self.alpha0 is None else self.alpha0
        return SolverOptions(alpha0=alpha0, schedule=self.schedule,
                             epsilon=self.epsilon, max_iter=self.max_iter)


def _stratified_folds(y, folds: int, rng) -> np.ndarray:
    assignment = np.empty(y.size, dtype=np.int64)
    for k in np.unique(y):
        members = np.flatnonzero(y == k)
        members = rng.permutation(members)
        assignment[members] = np.arange(members.size) % folds
    return assignment


def crossval_lambda(X, y, model: str, grid=LAMBDA_GRID, folds: int = 5,
                    rng_seed: int = 0) -> float:
    """Pick the regularizer with the lowest mean held-out source risk.

    Folds are stratified; a split whose training side misses a class is
    re-drawn (at most 100 attempts). Ties, and lambdas whose fits are
    degenerate on some fold, resolve toward the smaller lambda.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    grid = sorted(grid)
    if len(grid) == 1:
        return float(grid[0])
    K = int(y.max())
    rng = np.random.default_rng(rng_seed)

    classes = np.unique(y)
    for _ in range(100):
        assignment = _stratified_folds(y, folds, rng)
        ok = all(
            np.array_equal(np.unique(y[assignment != f]), classes)
            for f in range(folds)
        )
        if ok:
            break
    else:
        raise ValueError("could not build stratified folds with every class "
                         "in every training split after 100 attempts")

    mean_risks = []
    for lam in grid:
        fold_risks = []
        for f in range(folds):
            tr, va = assignment != f, assignment == f
            if not va.any():
                continue
            try:
                if model == "ls":
                    params = fit_ls(X[tr], one_hot(y[tr], K), ridge=lam)
                    fold_risks.append(ls_risk(params, X[va], one_hot(y[va], K)))
                else:
                    params = fit_da(X[tr], one_hot(y[tr], K), model, lam)
                    fold_risks.append(da_risk(params, X[va], one_hot(y[va], K)))
            except (ValueError, np.linalg.LinAlgError):
                fold_risks.append(np.inf)
        mean_risks.append(np.mean(fold_risks) if fold_risks else np.inf)
    best = int(np.argmin(mean_risks))  # argmin takes the first, grid is ascending
    return float(grid[best])


def _fit_source(X, y, K, model, lam):
    if model == "ls":
        return fit_ls(X, one_hot(y, K), ridge=lam)
    return fit_da(X, one_hot(y, K), model, lam)


def _fit_tcp(source_params, Z, model, lam, opts):
    if model == "ls":
        return fit_tcp_ls(source_params, Z, opts, ridge=lam)
    return fit_tcp_da(source_params, Z, model, lam, opts)


def _positive_class_auc(params, Z, u_true, model):
    """AUC with class 2 as the positive class; NaN for non-binary data."""
    if int(np.max(u_true)) != 2 or len(np.unique(u_true)) != 2:
        return float("nan")
    scores = ls_scores(params, Z) if model == "ls" else log_joint_scores(params, Z)
    return auc(scores[:, 1], np.asarray(u_true) == 2)


def _worker_count() -> int:
    raw = os.environ.get("TCP_ADAPT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_ssb_experiment(config: ExperimentConfig, dataset: Dataset) -> list[dict]:
    """Biased-source protocol: draw a biased subset as the source domain,
    adapt to the full sample set as the unlabeled target, compare with
    the oracle fit on the true labels. One row per repeat."""
    if dataset.labels is None:
        raise ValueError("the biased-subsampling experiment needs labels")

    def one_repeat(r: int) -> dict:
        seed = int(np.random.SeedSequence([config.rng_seed, r]).generate_state(1)[0])
        spec = BiasSampleSpec(config.n_source, rng_seed=seed)
        src_idx = sample_biased(dataset, spec)
        X_s, y_s = dataset.features[src_idx], dataset.labels[src_idx]
        if config.fixed_lambda is not None:
            lam = config.fixed_lambda
        else:
            lam = crossval_lambda(X_s, y_s, config.model, config.lambda_grid,
                                  config.cv_folds, seed)
        Z, u = dataset.features, dataset.labels
        source_params = _fit_source(X_s, y_s, dataset.K, config.model, lam)
        tcp = _fit_tcp(source_params, Z, config.model, lam,
                       config.solver_opts(Z.shape[0]))
        oracle_params = _fit_source(Z, u, dataset.K, config.model, lam)
        report = target_risk_report(
            source_params, tcp.params, oracle_params, Z, u, config.model,
            dataset=dataset.name, source_name=f"{dataset.name}[biased{config.n_source}]",
            target_name=dataset.name)
        return {
            "dataset": dataset.name,
            "source": report.source_name,
            "target": report.target_name,
            "model": config.model,
            "repeat": r,
            "lambda": lam,
            "source_risk": report.source_risk,
            "tcp_risk": report.tcp_risk,
            "oracle_risk": report.oracle_risk,
            "auc": _positive_class_auc(tcp.params, Z, u, config.model),
            "objective": tcp.objective,
            "iterations": tcp.iterations,
            "converged": tcp.converged,
            "reverted": tcp.reverted_to_source,
        }

    workers = _worker_count()
    if workers == 1 or config.repeats == 1:
        return [one_repeat(r) for r in range(config.repeats)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one_repeat, range(config.repeats)))


def run_da_experiment(config: ExperimentConfig, source_data: Dataset,
                      target_data: Dataset) -> dict:
    """Pairwise transfer: fit on the labeled source domain, adapt to the
    unlabeled target domain, report risks, AUC and the domain MMD."""
    if source_data.labels is None or target_data.labels is None:
        raise ValueError("both domains need labels (target labels are used "
                         "for evaluation only)")
    if source_data.D != target_data.D:
        raise ValueError("domains must share the feature schema")
    K = max(source_data.K, target_data.K)
    if config.fixed_lambda is not None:
        lam = config.fixed_lambda
    else:
        lam = crossval_lambda(source_data.features, source_data.labels,
                              config.model, config.lambda_grid,
                              config.cv_folds, config.rng_seed)
    Z, u = target_data.features, target_data.labels
    source_params = _fit_source(source_data.features, source_data.labels,
                                K, config.model, lam)
    tcp = _fit_tcp(source_params, Z, config.model, lam,
                   config.solver_opts(Z.shape[0]))
    oracle_params = _fit_source(Z, u, K, config.model, lam)
    report = target_risk_report(
        source_params, tcp.params, oracle_params, Z, u, config.model,
        dataset=f"{source_data.name}->{target_data.name}",
        source_name=source_data.name, target_name=target_data.name)
    return {
        "dataset": report.dataset,
        "source": source_data.name,
        "target": target_data.name,
        "model": config.model,
        "lambda": lam,
        "source_risk": report.source_risk,
        "tcp_risk": report.tcp_risk,
        "oracle_risk": report.oracle_risk,
        "auc": _positive_class_auc(tcp.params, Z, u, config.model),
        "mmd": mmd_rbf(source_data.features, target_data.features, 1.0),
        "objective": tcp.objective,
        "iterations": tcp.iterations,
        "converged": tcp.converged,
        "reverted": tcp.reverted_to_source,
        "q_star": tcp.q_star,
    }


def pca_2d(Z) -> np.ndarray:
    """First two principal-component coordinates of the samples."""
    Z = np.asarray(Z, dtype=np.float64)
    centered = Z - Z.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:2] if vt.shape[0] >= 2 else np.vstack([vt, np.zeros((1, Z.shape[1]))])
    return centered @ comps.T
