"""Least-squares classifier and its pessimistic contrastive adaptation.

The model is linear in the features (with an implicit intercept column)
and trained on one-hot or soft labels with a quadratic loss. Adaptation
minimizes the worst-case risk contrast against a fixed source model over
all hypothetical labelings of the target samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import augment_bias
from .solver import SaddleResult, SolverOptions, solve_saddle_annealed


@dataclass
class LinearParams:
    """Coefficient matrix of shape (D+1, K); the last row is the intercept."""

    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.ndim != 2:
            raise ValueError("theta must be a (D+1, K) matrix")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta contains non-finite entries")

    @property
    def K(self) -> int:
        return self.theta.shape[1]

    def to_json(self) -> dict:
        return {"kind": "ls", "theta": self.theta.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "LinearParams":
        if doc.get("kind") != "ls":
            raise ValueError(f"expected kind 'ls', got {doc.get('kind')!r}")
        return cls(np.array(doc["theta"], dtype=np.float64))


def fit_ls(X, Y, ridge: float = 0.0) -> LinearParams:
    """Closed-form least-squares fit of class indicator targets.

    Solves theta = (Zt'Zt + ridge I)^-1 Zt'Y on the bias-augmented design
    Zt. With ridge 0 and a rank-deficient design the minimum-norm
    solution is returned.
    """
    Y = np.asarray(Y, dtype=np.float64)
    Zt = augment_bias(X)
    if Y.ndim != 2 or Y.shape[0] != Zt.shape[0]:
        raise ValueError("Y must be an (n, K) label matrix matching X")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    if ridge == 0.0:
        theta, *_ = np.linalg.lstsq(Zt, Y, rcond=None)
    else:
        gram = Zt.T @ Zt + ridge * np.eye(Zt.shape[1])
        theta = np.linalg.solve(gram, Zt.T @ Y)
    return LinearParams(theta)


def ls_scores(params: LinearParams, Z) -> np.ndarray:
    """Per-class linear scores Zt @ theta; argmax is the predicted class."""
    Zt = augment_bias(Z)
    if Zt.shape[1] != params.theta.shape[0]:
        raise ValueError(
            f"feature dimension {Zt.shape[1] - 1} does not match "
            f"parameters for {params.theta.shape[0] - 1} features"
        )
    return Zt @ params.theta


def ls_risk(params: LinearParams, Z, Q) -> float:
    """Mean squared residual (1/m) sum_j sum_k (z_j theta_k - q_kj)^2."""
    Q = np.asarray(Q, dtype=np.float64)
    P = ls_scores(params, Z)
    if Q.shape != P.shape:
        raise ValueError(f"label matrix shape {Q.shape} does not match {P.shape}")
    return float(np.sum((P - Q) ** 2) / P.shape[0])


def tcp_ls_objective(params: LinearParams, source: LinearParams, Z, Q) -> float:
    """Risk contrast of params against the source model under labeling Q."""
    if params.theta.shape != source.theta.shape:
        raise ValueError("parameter shapes differ")
    return ls_risk(params, Z, Q) - ls_risk(source, Z, Q)


def tcp_ls_grad_q(params: LinearParams, source: LinearParams, Z) -> np.ndarray:
    """Gradient of the contrast in the soft labels: (2/m)(z theta_src - z theta).

    The contrast is linear in Q, so the gradient does not depend on Q.
    """
    if params.theta.shape != source.theta.shape:
        raise ValueError("parameter shapes differ")
    P = ls_scores(params, Z)
    P_src = ls_scores(source, Z)
    return (2.0 / Z.shape[0]) * (P_src - P)


def ls_worst_case_contrast(params: LinearParams, source: LinearParams, Z) -> float:
    """Largest contrast any labeling can achieve against ``params``.

    The contrast is linear in the labeling, so the maximum over all soft
    labelings is attained at a crisp labeling and splits per sample. A
    non-positive value certifies that params is never worse than the
    source model for any labeling of Z.
    """
    P = ls_scores(params, Z)
    P_src = ls_scores(source, Z)
    m = P.shape[0]
    const = np.sum(P**2 - P_src**2, axis=1)
    adversarial = np.max(2.0 * (P_src - P), axis=1)
    return float(np.sum(const + adversarial) / m)


def fit_tcp_ls(source: LinearParams, Z, opts: SolverOptions | None = None,
               ridge: float = 0.0) -> SaddleResult:
    """Adapt a least-squares model to unlabeled target samples Z.

    Runs the saddle solver (exact closed-form fit against the current
    labeling, projected gradient ascent on the labeling) and then checks
    the closed-form worst-case contrast of the solution. If the solution
    cannot be certified never-worse than the source model, the source
    parameters are returned unchanged (reverted_to_source is set), so the
    guarantee holds by construction. The same ridge must be used for the
    source fit.
    """
    Z = np.asarray(Z, dtype=np.float64)
    m = Z.shape[0]
    K = source.K
    Zt = augment_bias(Z)
    if Zt.shape[1] != source.theta.shape[0]:
        raise ValueError("target feature dimension does not match source model")
    P_src = Zt @ source.theta

    # (Zt'Zt + ridge I)^-1 Zt' applied per iteration as two skinny matmuls
    if ridge == 0.0:
        solve_design = np.linalg.pinv(Zt)
    else:
        gram = Zt.T @ Zt + ridge * np.eye(Zt.shape[1])
        solve_design = np.linalg.solve(gram, Zt.T)

    cache = {"params": None, "P": None}

    def predictions(params):
        if params is cache["params"]:
            return cache["P"]
        return Zt @ params.theta

    def inner_min(Q):
        params = LinearParams(solve_design @ Q)
        cache["params"] = params
        cache["P"] = Zt @ params.theta
        return params

    def objective(params, Q):
        P = predictions(params)
        return (np.sum((P - Q) ** 2) - np.sum((P_src - Q) ** 2)) / m

    def grad_q(params):
        return (2.0 / m) * (P_src - predictions(params))

    def worst_case(params):
        P = predictions(params)
        const = np.sum(P**2 - P_src**2, axis=1)
        adversarial = np.max(2.0 * (P_src - P), axis=1)
        return np.sum(const + adversarial) / m

    result = solve_saddle_annealed(inner_min, grad_q, objective, m, K, opts,
                                   worst_case=worst_case)
    if ls_worst_case_contrast(result.params, source, Z) > 0.0:
        result.params = LinearParams(source.theta.copy())
        result.objective = 0.0
        result.reverted_to_source = True
    return result
