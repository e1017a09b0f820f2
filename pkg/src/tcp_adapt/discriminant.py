"""Gaussian discriminant analysis (shared or per-class covariance) with
soft-label weighted estimation and pessimistic contrastive adaptation.

The loss is the class-weighted negative log-likelihood of per-class
Gaussians. Parameter estimation under a soft labeling has closed-form
weighted-moment solutions, which makes the exact inner step of the
saddle solver cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))

# priors smaller than this contribute log(PRIOR_FLOOR) instead of -inf
PRIOR_FLOOR = 1e-300

VARIANTS = ("lda", "qda")


@dataclass
class GaussianParams:
    """Per-class priors, means and covariances of a discriminant model.

    covariances has shape (K, D, D); for the shared-covariance variant
    every slice is the same pooled matrix. ``lam`` records the
    regularization actually applied to the covariance estimates.
    """

    variant: str
    priors: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        self.priors = np.asarray(self.priors, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.covariances = np.asarray(self.covariances, dtype=np.float64)
        K = self.priors.shape[0]
        if self.means.shape[0] != K or self.covariances.shape[0] != K:
            raise ValueError("priors, means and covariances disagree on class count")
        if abs(self.priors.sum() - 1.0) > 1e-12 or np.any(self.priors < 0):
            raise ValueError("priors must be nonnegative and sum to 1")
        swapped = np.swapaxes(self.covariances, 1, 2)
        if np.max(np.abs(self.covariances - swapped), initial=0.0) > 1e-10:
            raise ValueError("covariances must be symmetric")
        if self.variant == "lda" and K > 1:
            if not np.array_equal(self.covariances[1:], np.broadcast_to(
                    self.covariances[0], self.covariances[1:].shape)):
                raise ValueError("shared-covariance model requires identical matrices")

    @property
    def K(self) -> int:
        return self.priors.shape[0]

    @property
    def D(self) -> int:
        return self.means.shape[1]

    def to_json(self) -> dict:
        covs = self.covariances
        if self.variant == "lda":
            covs = covs[:1]
        return {
            "kind": self.variant,
            "priors": self.priors.tolist(),
            "means": self.means.tolist(),
            "covs": covs.tolist(),
            "lambda": self.lam,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GaussianParams":
        kind = doc.get("kind")
        if kind not in VARIANTS:
            raise ValueError(f"expected kind 'lda' or 'qda', got {kind!r}")
        priors = np.array(doc["priors"], dtype=np.float64)
        means = np.array(doc["means"], dtype=np.float64)
        covs = np.array(doc["covs"], dtype=np.float64)
        if covs.shape[0] != priors.shape[0]:
            covs = np.repeat(covs[:1], priors.shape[0], axis=0)
        return cls(kind, priors, means, covs, float(doc.get("lambda", 0.0)))


def regularize_cov(S, lam: float) -> np.ndarray:
    """Clamp negative eigenvalues to zero, then add lam * identity.

    The input must be symmetric within 1e-8; it is symmetrized exactly
    before the eigenvalue floor. The result is symmetric positive
    semi-definite, and positive definite whenever lam > 0.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("covariance must be a square matrix")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    asym = np.max(np.abs(S - S.T)) if S.size else 0.0
    if asym > 1e-8:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:g})")
    S = 0.5 * (S + S.T)
    try:
        # positive definite already: the eigenvalue floor is a no-op
        np.linalg.cholesky(S)
        floored = S
    except np.linalg.LinAlgError:
        eigvals, eigvecs = np.linalg.eigh(S)
        floored = (eigvecs * np.maximum(eigvals, 0.0)) @ eigvecs.T
        floored = 0.5 * (floored + floored.T)
    if lam > 0:
        floored = floored + lam * np.eye(S.shape[0])
    return floored


def _regularize_batch(covs: np.ndarray, lam: float) -> np.ndarray:
    """regularize_cov applied to a (K, D, D) stack, batched when possible."""
    covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
    try:
        np.linalg.cholesky(covs)  # all positive definite: floor is a no-op
    except np.linalg.LinAlgError:
        covs = np.stack([regularize_cov(c, 0.0) for c in covs])
    if lam > 0:
        covs = covs + lam * np.eye(covs.shape[1])
    return covs


def _fit_arrays(X, Q, variant, lam, prev_means):
    """Weighted-moment estimates as raw arrays (priors, means, covs, diff).

    ``diff`` is the (m, K, D) tensor of sample-minus-class-mean rows,
    reusable for scoring against the same means.
    """
    m, D = X.shape
    K = Q.shape[1]
    mass = Q.sum(axis=0)
    mass_floor = 1e-10 * m
    degenerate = mass < mass_floor
    safe_mass = np.where(degenerate, 1.0, mass)

    priors = mass / m
    means = (Q.T @ X) / safe_mass[:, None]
    diff = X[:, None, :] - means[None, :, :]
    covs = np.einsum("jk,jkd,jke->kde", Q, diff, diff) / safe_mass[:, None, None]
    covs = _regularize_batch(covs, lam)

    if degenerate.any():
        for k in np.flatnonzero(degenerate):
            priors[k] = mass_floor / m
            means[k] = prev_means[k] if prev_means is not None else X.mean(axis=0)
            covs[k] = lam * np.eye(D)
            diff[:, k, :] = X - means[k]
        priors = priors / priors.sum()

    if variant == "lda":
        pooled = np.einsum("k,kde->de", priors, covs)
        pooled = regularize_cov(pooled, 0.0)
        covs = np.repeat(pooled[None, :, :], K, axis=0)

    return priors, means, covs, diff


def fit_da(X, Q, variant: str, lam: float = 0.0,
           prev: GaussianParams | None = None) -> GaussianParams:
    """Weighted-moment estimation of a discriminant model.

    Priors are mean class weights, means and covariances are
    weight-normalized first and second moments. Every class covariance
    goes through regularize_cov with lam; the shared-covariance variant
    then pools the regularized matrices by prior weight and floors the
    pooled matrix once more.

    A class whose total weight falls below 1e-10 * m is degenerate: its
    prior is floored (then all priors renormalized), its mean kept from
    ``prev`` (the overall sample mean when no previous estimate exists),
    and its covariance set to lam * identity.
    """
    X = np.asarray(X, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if X.ndim != 2 or Q.ndim != 2 or X.shape[0] != Q.shape[0]:
        raise ValueError("X and Q must be matrices with one row per sample")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    prev_means = prev.means if prev is not None else None
    priors, means, covs, _ = _fit_arrays(X, Q, variant, lam, prev_means)
    return GaussianParams(variant, priors, means, covs, lam)


def _scores_from(priors, means, covs, variant, Z, diff=None):
    """Log-joint score matrix from raw parameter arrays.

    Raises ValueError on a non-positive-definite covariance. ``diff``
    is the precomputed (m, K, D) mean-difference tensor, when available.
    """
    D = means.shape[1]
    K = priors.shape[0]
    use_covs = covs[:1] if variant == "lda" else covs
    try:
        chol = np.linalg.cholesky(use_covs)
    except np.linalg.LinAlgError:
        raise ValueError("a class covariance is not positive definite") from None
    half_logdet = np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
    chol_inv = np.linalg.solve(chol, np.broadcast_to(np.eye(D), chol.shape))
    if variant == "lda":
        chol_inv = np.broadcast_to(chol_inv[0], (K, D, D))
        half_logdet = np.broadcast_to(half_logdet[0], (K,))
    if diff is None:
        diff = Z[:, None, :] - means[None, :, :]
    white = np.einsum("kde,jke->jkd", chol_inv, diff)
    quad = np.einsum("jkd,jkd->jk", white, white)
    log_priors = np.log(np.maximum(priors, PRIOR_FLOOR))
    return log_priors - 0.5 * D * LOG_2PI - half_logdet - 0.5 * quad


def log_joint_scores(params: GaussianParams, Z) -> np.ndarray:
    """Matrix of log pi_k + log N(z_j | mu_k, Sigma_k), shape (m, K).

    The argmax over columns is the predicted class. Raises when a class
    covariance is not positive definite. Quadratic forms and log
    determinants come from Cholesky factorizations, batched over classes.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != params.D:
        raise ValueError(
            f"expected samples with {params.D} features, got shape {Z.shape}"
        )
    return _scores_from(params.priors, params.means, params.covariances,
                        params.variant, Z)


def predict_da(params: GaussianParams, Z) -> np.ndarray:
    """Class scores for new samples; argmax over columns classifies."""
    return log_joint_scores(params, Z)


def da_risk(params: GaussianParams, Z, Q) -> float:
    """Average negative log-likelihood weighted by the labeling Q.

    Can be negative: densities exceed 1 when covariances are small.
    """
    Q = np.asarray(Q, dtype=np.float64)
    S = log_joint_scores(params, Z)
    if Q.shape != S.shape:
        raise ValueError(f"label matrix shape {Q.shape} does not match {S.shape}")
    return float(-np.sum(Q * S) / S.shape[0])


def tcp_da_objective(params: GaussianParams, source: GaussianParams, Z, Q) -> float:
    """Risk contrast of params against the source model under labeling Q."""
    _check_compatible(params, source)
    return da_risk(params, Z, Q) - da_risk(source, Z, Q)


def tcp_da_grad_q(params: GaussianParams, source: GaussianParams, Z) -> np.ndarray:
    """Gradient of the contrast in the soft labels.

    Entry (j, k) is -(1/m) log of the joint-density ratio of the two
    models; the contrast is linear in Q so the gradient is Q-free.
    """
    _check_compatible(params, source)
    S = log_joint_scores(params, Z)
    S_src = log_joint_scores(source, Z)
    return (S_src - S) / Z.shape[0]


def da_worst_case_contrast(params: GaussianParams, source: GaussianParams, Z) -> float:
    """Largest contrast any labeling can achieve against ``params``.

    Non-positive certifies that params is never worse than the source
    model for any labeling of Z (strictly better when negative).
    """
    S = log_joint_scores(params, Z)
    S_src = log_joint_scores(source, Z)
    return float(np.max(S_src - S, axis=1).sum() / Z.shape[0])


class _DAState:
    """Raw-array iterate of the adaptation loop (no validation overhead)."""

    __slots__ = ("priors", "means", "covs", "scores")

    def __init__(self, priors, means, covs, scores):
        self.priors = priors
        self.means = means
        self.covs = covs
        self.scores = scores


def _tcp_da_step(Z, Q, variant, lam, prev_means):
    """One fused inner step: weighted fit plus scoring on shared buffers.

    When a labeling starves a class below D samples at lam 0 the fit is
    singular and its true contrast is -inf; an epsilon floor on the
    covariances keeps the iterate evaluable (hugely negative, never
    selected) so the ascent can move away from it.
    """
    priors, means, covs, diff = _fit_arrays(Z, Q, variant, lam, prev_means)
    try:
        scores = _scores_from(priors, means, covs, variant, Z, diff)
    except ValueError:
        K, D = means.shape
        eps = 1e-9 * float(np.trace(covs.sum(axis=0))) / (K * D) + 1e-30
        covs = covs + eps * np.eye(D)
        scores = _scores_from(priors, means, covs, variant, Z, diff)
    return _DAState(priors, means, covs, scores)


def _check_compatible(params: GaussianParams, source: GaussianParams):
    if params.variant != source.variant:
        raise ValueError(
            f"variant mismatch: {params.variant!r} vs {source.variant!r}"
        )
    if params.means.shape != source.means.shape:
        raise ValueError("parameter shapes differ")


def fit_tcp_da(source: GaussianParams, Z, variant: str | None = None,
               lam: float | None = None, opts=None):
    """Adapt a discriminant model to unlabeled target samples Z.

    The inner step refits the model to the current labeling in closed
    form; the labeling takes one projected ascent step per iteration.
    The source model must carry the same regularization lam, otherwise
    the never-worse guarantee does not hold. As for the least-squares
    case, the returned parameters revert to the source model when the
    closed-form worst-case contrast cannot certify them (on continuous
    data with enough samples per class this does not happen).
    """
    from .solver import solve_saddle_annealed  # local import avoids a cycle

    Z = np.asarray(Z, dtype=np.float64)
    if variant is None:
        variant = source.variant
    if lam is None:
        lam = source.lam
    if variant != source.variant:
        raise ValueError(f"source model is {source.variant!r}, requested {variant!r}")
    if lam != source.lam:
        raise ValueError(
            f"source model was regularized with lambda={source.lam}, requested {lam}"
        )
    m = Z.shape[0]
    K = source.K
    S_src = log_joint_scores(source, Z)

    prev_holder = {"means": None}

    def inner_min(Q):
        state = _tcp_da_step(Z, Q, variant, lam, prev_holder["means"])
        prev_holder["means"] = state.means
        return state

    def objective(state, Q):
        return float(np.sum(Q * (S_src - state.scores)) / m)

    def grad_q(state):
        return (S_src - state.scores) / m

    def worst_case(state):
        return np.max(S_src - state.scores, axis=1).sum() / m

    result = solve_saddle_annealed(inner_min, grad_q, objective, m, K, opts,
                                   worst_case=worst_case)
    best = result.params
    result.params = GaussianParams(variant, best.priors, best.means, best.covs, lam)
    if da_worst_case_contrast(result.params, source, Z) > 0.0:
        result.params = GaussianParams(
            source.variant,
            source.priors.copy(),
            source.means.copy(),
            source.covariances.copy(),
            source.lam,
        )
        result.objective = 0.0
        result.reverted_to_source = True
    return result
