"""Loading, validation and encoding of labeled/unlabeled datasets.

Feature matrices are float64 arrays of shape (n, D). Labels are integer
vectors with values in {1..K}; class indices are assigned by sorting the
original label values, so class 2 is always the larger (or lexically
later) of two original labels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

DEFAULT_MISSING_MARKERS = frozenset({"", "?", "NA"})


@dataclass
class Dataset:
    """A feature matrix with optional class labels and domain metadata."""

    features: np.ndarray
    labels: np.ndarray | None = None
    name: str = ""
    K: int = 0
    label_values: tuple = field(default=None, repr=False)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        n, d = self.features.shape
        if n < 1 or d < 1:
            raise ValueError(f"need at least one sample and one feature, got {n}x{d}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain NaN or infinite entries")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ValueError("labels must be a vector with one entry per sample")
            if self.K <= 0:
                self.K = int(self.labels.max())
            if self.labels.min() < 1 or self.labels.max() > self.K:
                raise ValueError(f"labels must lie in 1..{self.K}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def D(self) -> int:
        return self.features.shape[1]

    def subset(self, idx, name: str | None = None) -> "Dataset":
        """New dataset restricted to the given sample indices."""
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(
            self.features[idx],
            labels,
            name if name is not None else self.name,
            self.K,
            self.label_values,
        )


def load_csv(
    path,
    label_column=None,
    missing_markers=DEFAULT_MISSING_MARKERS,
    header: bool = False,
    name: str | None = None,
) -> Dataset:
    """Load a dataset from a comma-separated file.

    Missing feature cells (empty, or any token in ``missing_markers``) are
    imputed to 0. Label values are remapped to contiguous {1..K} preserving
    the sorted order of the original values.

    Args:
        path: file to read.
        label_column: 0-based column index, or column name when
            ``header`` is true. None loads an unlabeled dataset.
        missing_markers: tokens treated as missing.
        header: whether the first row holds column names.
        name: dataset name; defaults to the file stem.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: file is empty")

    columns = None
    if header:
        columns = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: no data rows after header")

    ncol = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != ncol:
            raise ValueError(
                f"{path}: row {i + 1} has {len(row)} columns, expected {ncol}"
            )

    label_idx = None
    if label_column is not None:
        if isinstance(label_column, str):
            if columns is None:
                raise ValueError("label column given by name but file has no header")
            if label_column not in columns:
                raise ValueError(f"label column {label_column!r} not in header")
            label_idx = columns.index(label_column)
        else:
            label_idx = int(label_column)
            if label_idx < 0:
                label_idx += ncol
            if not 0 <= label_idx < ncol:
                raise ValueError(f"label column {label_column} out of range 0..{ncol - 1}")

    feat_idx = [j for j in range(ncol) if j != label_idx]
    if not feat_idx:
        raise ValueError("no feature columns left after removing the label column")

    features = np.zeros((len(rows), len(feat_idx)))
    raw_labels = []
    for i, row in enumerate(rows):
        for out_j, j in enumerate(feat_idx):
            cell = row[j].strip()
            if cell in missing_markers:
                continue  # imputed to 0
            try:
                features[i, out_j] = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: row {i + 1}, column {j + 1}: "
                    f"non-numeric cell {cell!r}"
                ) from None
        if label_idx is not None:
            raw_labels.append(row[label_idx].strip())

    labels = None
    label_values = None
    if label_idx is not None:
        labels, label_values = _encode_labels(raw_labels)

    if name is None:
        name = str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    K = len(label_values) if label_values is not None else 0
    return Dataset(features, labels, name, K, label_values)


def _encode_labels(raw):
    """Map raw label tokens to {1..K} by sorted original value."""
    distinct = set(raw)
    try:
        order = sorted(distinct, key=float)
    except ValueError:
        order = sorted(distinct)
    index = {v: k + 1 for k, v in enumerate(order)}
    return np.array([index[v] for v in raw], dtype=np.int64), tuple(order)


def write_csv(path, dataset: Dataset) -> None:
    """Write features (and labels, when present) back to CSV.

    Floats are written in shortest round-trip form, so load -> write ->
    load reproduces the feature matrix bit-exactly.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.features[i]]
            if dataset.labels is not None:
                orig = dataset.label_values
                row.append(
                    str(orig[dataset.labels[i] - 1]) if orig else str(dataset.labels[i])
                )
            writer.writerow(row)


def one_hot(labels, K: int) -> np.ndarray:
    """One-hot encode integer labels in {1..K} as an (n, K) matrix."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ValueError("labels must be a vector")
    if labels.size and (labels.min() < 1 or labels.max() > K):
        raise ValueError(f"labels must lie in 1..{K}")
    out = np.zeros((labels.size, K))
    out[np.arange(labels.size), labels - 1] = 1.0
    return out


def augment_bias(features) -> np.ndarray:
    """Append a constant column of ones (intercept column) to the features."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("features must be a 2-d matrix")
    n = features.shape[0]
    return np.hstack([features, np.ones((n, 1))])
