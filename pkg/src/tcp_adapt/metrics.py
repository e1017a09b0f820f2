"""Evaluation metrics: target risks, ROC AUC and kernel two-sample MMD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import rankdata

from .data import one_hot
from .discriminant import GaussianParams, da_risk
from .least_squares import LinearParams, ls_risk


@dataclass
class RiskReport:
    """Target risks of the source, adapted and oracle models."""

    model_kind: str
    source_risk: float
    tcp_risk: float
    oracle_risk: float
    dataset: str = ""
    source_name: str = ""
    target_name: str = ""


def auc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative.

    Ties count one half (Mann-Whitney normalization). ``labels`` are
    binary; anything nonzero is the positive class.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be vectors of equal length")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present to compute an AUC")
    ranks = rankdata(scores, method="average")
    u_stat = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return u_stat / (n_pos * n_neg)


def mmd_rbf(X, Z, bandwidth: float = 1.0) -> float:
    """Empirical maximum mean discrepancy with an RBF kernel.

    Biased V-statistic: n^-2 sum K(x,x') - 2(nm)^-1 sum K(x,z)
    + m^-2 sum K(z,z'), with K(a,b) = exp(-|a-b|^2 / (2 bandwidth^2)).
    Zero for identical sample sets.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if X.shape[1] != Z.shape[1]:
        raise ValueError("sample sets must share the feature dimension")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    gamma = 1.0 / (2.0 * bandwidth**2)
    k_xx = np.exp(-gamma * cdist(X, X, "sqeuclidean")).mean()
    k_xz = np.exp(-gamma * cdist(X, Z, "sqeuclidean")).mean()
    k_zz = np.exp(-gamma * cdist(Z, Z, "sqeuclidean")).mean()
    return float(k_xx - 2.0 * k_xz + k_zz)


def target_risk_report(source_params, tcp_params, oracle_params, Z, u_true,
                       model_kind: str, dataset: str = "",
                       source_name: str = "", target_name: str = "") -> RiskReport:
    """Evaluate source/adapted/oracle risks on the true target labels."""
    if model_kind == "ls":
        if not all(isinstance(p, LinearParams)
                   for p in (source_params, tcp_params, oracle_params)):
            raise ValueError("model_kind 'ls' requires least-squares parameters")
        K = source_params.K
        U = one_hot(u_true, K)
        risks = [ls_risk(p, Z, U) for p in (source_params, tcp_params, oracle_params)]
    elif model_kind in ("lda", "qda"):
        if not all(isinstance(p, GaussianParams)
                   for p in (source_params, tcp_params, oracle_params)):
            raise ValueError(f"model_kind {model_kind!r} requires Gaussian parameters")
        K = source_params.K
        U = one_hot(u_true, K)
        risks = [da_risk(p, Z, U) for p in (source_params, tcp_params, oracle_params)]
    else:
        raise ValueError(f"unknown model kind {model_kind!r}")
    return RiskReport(model_kind, *risks, dataset=dataset,
                      source_name=source_name, target_name=target_name)
