"""Sample-selection-biased subsampling of a labeled dataset.

Per class, samples are drawn without replacement around a seed point
(the class sample closest to the origin in Mahalanobis distance), with
weights decaying exponentially in the squared Mahalanobis distance to
the seed. Class quotas follow the full dataset's class priors, so the
biased subset is concentrated in feature space but keeps the original
label balance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset


@dataclass
class BiasSampleSpec:
    n_source: int
    rng_seed: int = 0
    replacementless: bool = True

    def __post_init__(self):
        if self.n_source < 1:
            raise ValueError("n_source must be positive")
        if not self.replacementless:
            raise ValueError("only sampling without replacement is supported")


def class_priors(labels, K: int) -> np.ndarray:
    """Empirical class prior distribution of an integer label vector."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("labels must be nonempty")
    counts = np.bincount(labels, minlength=K + 1)[1 : K + 1]
    return counts / labels.size


def mahalanobis_sq(x0, xk, cov_inv) -> float:
    """Squared Mahalanobis distance (x0 - xk) Sigma^-1 (x0 - xk)'."""
    x0 = np.asarray(x0, dtype=np.float64)
    xk = np.asarray(xk, dtype=np.float64)
    cov_inv = np.asarray(cov_inv, dtype=np.float64)
    if x0.shape != xk.shape or cov_inv.shape != (x0.size, x0.size):
        raise ValueError("dimension mismatch between points and covariance")
    diff = x0 - xk
    return float(diff @ cov_inv @ diff)


def largest_remainder_quotas(priors, total: int) -> np.ndarray:
    """Round priors * total to integers that sum exactly to total.

    Floors first, then hands the remaining units to the classes with the
    largest fractional parts (ties to the lower class index).
    """
    priors = np.asarray(priors, dtype=np.float64)
    exact = priors * total
    quotas = np.floor(exact).astype(np.int64)
    remainder = total - quotas.sum()
    if remainder > 0:
        fractions = exact - quotas
        order = np.lexsort((np.arange(priors.size), -fractions))
        quotas[order[:remainder]] += 1
    return quotas


def pooled_cov_inv(features, eig_floor: float = 1e-8) -> np.ndarray:
    """Inverse of the covariance of all samples, eigenvalue-floored.

    Constant columns make the raw covariance singular; flooring the
    eigenvalues at ``eig_floor`` keeps the inverse defined.
    """
    features = np.asarray(features, dtype=np.float64)
    cov = np.cov(features, rowvar=False)
    cov = np.atleast_2d(cov)
    eigvals, eigvecs = np.linalg.eigh(0.5 * (cov + cov.T))
    eigvals = np.maximum(eigvals, eig_floor)
    if not np.all(np.isfinite(eigvals)):
        raise ValueError("pooled covariance is not finite")
    return (eigvecs / eigvals) @ eigvecs.T


def class_seed_and_weights(features, cov_inv):
    """Seed index (closest to the origin) and selection weights for one class.

    Weights are exp(-d) with d the squared Mahalanobis distance to the
    seed; returned as log-weights to keep far samples representable.
    """
    features = np.asarray(features, dtype=np.float64)
    d_origin = np.einsum("nd,de,ne->n", features, cov_inv, features)
    seed = int(np.argmin(d_origin))
    diff = features - features[seed]
    d_seed = np.einsum("nd,de,ne->n", diff, cov_inv, diff)
    return seed, -d_seed


def sample_biased(data: Dataset, spec: BiasSampleSpec) -> np.ndarray:
    """Indices of a biased source subset of ``data``.

    Per class: find the seed, then draw the class quota without
    replacement with probability proportional to exp(-distance to seed).
    Deterministic for a fixed rng_seed.
    """
    if data.labels is None:
        raise ValueError("biased sampling requires a labeled dataset")
    if spec.n_source > data.n:
        raise ValueError(f"cannot draw {spec.n_source} from {data.n} samples")
    priors = class_priors(data.labels, data.K)
    quotas = largest_remainder_quotas(priors, spec.n_source)
    cov_inv = pooled_cov_inv(data.features)

    rng = np.random.default_rng(spec.rng_seed)
    chosen = []
    for k in range(1, data.K + 1):
        quota = int(quotas[k - 1])
        if quota == 0:
            continue
        members = np.flatnonzero(data.labels == k)
        if quota > members.size:
            raise ValueError(
                f"class {k} has {members.size} samples, quota is {quota}"
            )
        _, log_w = class_seed_and_weights(data.features[members], cov_inv)
        # weighted draw without replacement via exponential-keys order
        # statistics, computed in the log domain: ranking by
        # log(w) - log(-log(u)) equals ranking by u ** (1/w) and never
        # underflows for distant samples
        u = rng.random(members.size)
        keys = log_w - np.log(-np.log(u))
        top = np.argsort(keys)[::-1][:quota]
        chosen.append(members[np.sort(top)])
    return np.concatenate(chosen)


def write_indices_csv(path, indices) -> None:
    """One selected index per line, for experiment reproducibility."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index\n")
        for i in indices:
            fh.write(f"{int(i)}\n")
