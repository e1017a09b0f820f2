"""Euclidean projection onto the probability simplex.

The projection of v is max(v - tau, 0) where tau solves
sum(max(v_i - tau, 0)) = 1; tau is found exactly by sorting
(O(K log K) per row).

Row-wise projection is the inner kernel of the saddle solver, so a
compiled version is used when the extension built; set TCP_ADAPT_PURE=1
to force the pure-numpy implementation (the benchmark compares both).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from . import _simplex_core
except ImportError:  # extension not built
    _simplex_core = None

HAVE_COMPILED_KERNEL = _simplex_core is not None


def project_simplex(v) -> np.ndarray:
    """Project a single vector onto the probability simplex."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("expected a vector")
    return _project_rows_numpy(v[None, :])[0]


def project_rows(q) -> np.ndarray:
    """Project each row of an (m, K) matrix onto the simplex independently."""
    q = np.ascontiguousarray(q, dtype=np.float64)
    if q.ndim != 2:
        raise ValueError("expected an (m, K) matrix")
    if _simplex_core is not None and not _force_pure():
        return _simplex_core.project_rows(q)
    return _project_rows_numpy(q)


def _force_pure() -> bool:
    return os.environ.get("TCP_ADAPT_PURE", "") not in ("", "0")


def _project_rows_numpy(q: np.ndarray) -> np.ndarray:
    """Vectorized sort-and-threshold projection, one row per sample.

    Rows are shifted by their max first; the projection is invariant
    under uniform shifts and the threshold stays well conditioned for
    huge inputs.
    """
    m, k = q.shape
    q = q - q.max(axis=1, keepdims=True)
    s = np.sort(q, axis=1)[:, ::-1]
    csum = np.cumsum(s, axis=1)
    tau_cand = (csum - 1.0) / np.arange(1, k + 1)
    # rho = last index where the sorted entry still exceeds its threshold
    rho = k - 1 - np.argmax((s - tau_cand > 0.0)[:, ::-1], axis=1)
    tau = tau_cand[np.arange(m), rho]
    return np.maximum(q - tau[:, None], 0.0)


def check_soft_labels(q, tol: float = 1e-12) -> np.ndarray:
    """Validate that every row of q is a point on the simplex."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2:
        raise ValueError("expected an (m, K) matrix")
    if np.any(q < -tol) or np.any(q > 1.0 + tol):
        raise ValueError("soft labels must lie in [0, 1]")
    sums = q.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > max(tol, 1e-12)):
        j = int(np.argmax(np.abs(sums - 1.0)))
        raise ValueError(f"row {j} sums to {sums[j]!r}, expected 1")
    return q
