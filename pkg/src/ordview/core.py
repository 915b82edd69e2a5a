"""Labels, confusion matrices, and stratified data handling.

Conventions used across the package:

* labels are 0-based ordinal ranks ``0..n_classes-1`` stored as int64;
* probability vectors are 1-D float64 arrays summing to 1;
* every random operation takes an explicit integer seed and builds its own
  ``numpy.random.Generator``; nothing touches global RNG state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MultiViewDataset",
    "check_probability_vector",
    "argmax_label",
    "confusion_matrix",
    "class_counts",
    "apportion_counts",
    "stratified_split",
    "stratified_resample",
]


def check_probability_vector(p, tol: float = 1e-9) -> np.ndarray:
    """Validate a 1-D probability vector; returns it as float64.

    Entries must be finite and >= -tol, and the sum must be within tol of 1.
    """
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("probability vector must be 1-D and non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("probability vector has non-finite entries")
    if np.any(arr < -tol):
        raise ValueError(f"negative probability entry: min={arr.min()!r}")
    s = float(arr.sum())
    if abs(s - 1.0) > tol:
        raise ValueError(f"probabilities sum to {s!r}, not 1")
    return arr


def argmax_label(p) -> int:
    """Predicted label for one probability vector; ties go to the lowest index."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("expected a non-empty 1-D probability vector")
    return int(np.argmax(arr))


def _validate_labels(labels, n_classes: int) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise ValueError("labels must be 1-D")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        flt = np.asarray(labels, dtype=np.float64)
        if not np.all(flt == np.floor(flt)):
            raise ValueError("labels must be integers")
        arr = flt.astype(np.int64)
    arr = arr.astype(np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
        raise ValueError(
            f"labels must lie in [0, {n_classes - 1}], "
            f"got range [{arr.min()}, {arr.max()}]"
        )
    return arr


def class_counts(labels, n_classes: int) -> np.ndarray:
    """Per-class sample counts as an int64 vector of length n_classes."""
    arr = _validate_labels(labels, n_classes)
    return np.bincount(arr, minlength=n_classes).astype(np.int64)


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Counts matrix with rows = true class, columns = predicted class."""
    if n_classes < 2:
        raise ValueError("n_classes must be >= 2")
    yt = _validate_labels(y_true, n_classes)
    yp = _validate_labels(y_pred, n_classes)
    if yt.shape != yp.shape:
        raise ValueError("y_true and y_pred must have the same length")
    flat = np.bincount(yt * n_classes + yp, minlength=n_classes * n_classes)
    return flat.reshape(n_classes, n_classes).astype(np.int64)


@dataclass(frozen=True)
class MultiViewDataset:
    """Aligned feature blocks (one per view) plus one shared label vector.

    Arrays are coerced to float64/int64 and frozen read-only, so datasets can
    be shared across experiment arms without defensive copies.
    """

    views: dict[str, np.ndarray]
    labels: np.ndarray
    n_classes: int
    _counts: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if not self.views:
            raise ValueError("at least one view is required")
        labels = _validate_labels(self.labels, self.n_classes)
        labels.flags.writeable = False
        views: dict[str, np.ndarray] = {}
        for name, block in self.views.items():
            arr = np.ascontiguousarray(block, dtype=np.float64)
            if arr.ndim != 2:
                raise ValueError(f"view {name!r} must be a 2-D array")
            if arr.shape[0] != labels.shape[0]:
                raise ValueError(
                    f"view {name!r} has {arr.shape[0]} rows, "
                    f"labels have {labels.shape[0]}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"view {name!r} has non-finite entries")
            arr.flags.writeable = False
            views[name] = arr
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "labels", labels)
        counts = np.bincount(labels, minlength=self.n_classes).astype(np.int64)
        counts.flags.writeable = False
        object.__setattr__(self, "_counts", counts)

    @property
    def n_samples(self) -> int:
        return int(self.labels.shape[0])

    @property
    def view_names(self) -> tuple[str, ...]:
        return tuple(self.views)

    def counts(self) -> np.ndarray:
        return self._counts

    def subset(self, indices) -> "MultiViewDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return MultiViewDataset(
            views={name: block[idx] for name, block in self.views.items()},
            labels=self.labels[idx],
            n_classes=self.n_classes,
        )


def apportion_counts(quotas, total: int) -> np.ndarray:
    """Integer counts summing to ``total`` from fractional quotas.

    Largest-remainder rule: floor everything, then hand the leftover units to
    the largest remainders. Remainders are compared rounded to 12 decimals so
    float noise cannot reorder genuine ties; tied remainders favor the class
    with the smaller quota, then the lower index.
    """
    q = np.asarray(quotas, dtype=np.float64)
    if q.ndim != 1 or q.size == 0 or np.any(q < 0):
        raise ValueError("quotas must be a non-negative 1-D vector")
    base = np.floor(q).astype(np.int64)
    leftover = int(total - base.sum())
    if leftover < 0 or leftover > q.size:
        raise ValueError("total is inconsistent with the quotas")
    rem = np.round(q - base, 12)
    order = sorted(range(q.size), key=lambda i: (-rem[i], q[i], i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def _test_counts(counts: np.ndarray, test_fraction: float) -> np.ndarray:
    total = int(math.floor(counts.sum() * test_fraction + 0.5))
    return apportion_counts(counts * test_fraction, total)


def stratified_split(
    data: MultiViewDataset, test_fraction: float, seed: int
) -> tuple[MultiViewDataset, MultiViewDataset]:
    """One deterministic (train, test) split preserving class proportions.

    The overall test size is round-half-up of n_samples * test_fraction and
    is apportioned to classes by the largest-remainder rule, so per-class
    test counts match the class proportions as closely as integers allow.
    Which samples land where is decided by a seeded shuffle within each class.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be strictly between 0 and 1")
    counts = data.counts()
    if np.any(counts < 2):
        raise ValueError("every class needs at least 2 samples to split")
    t_counts = _test_counts(counts, test_fraction)
    if np.any(t_counts >= counts):
        raise ValueError(
            "test_fraction leaves no training samples for some class"
        )
    rng = np.random.default_rng(seed)
    test_idx = []
    train_idx = []
    for q in range(data.n_classes):
        members = np.flatnonzero(data.labels == q)
        perm = rng.permutation(members.size)
        shuffled = members[perm]
        test_idx.append(shuffled[: t_counts[q]])
        train_idx.append(shuffled[t_counts[q] :])
    train = np.sort(np.concatenate(train_idx))
    test = np.sort(np.concatenate(test_idx))
    return data.subset(train), data.subset(test)


def stratified_resample(data: MultiViewDataset, seed: int) -> MultiViewDataset:
    """Bootstrap resample drawn within each class.

    Every class keeps its exact count (rows are drawn with replacement from
    that class only), so the label vector of the result equals the input's.
    """
    rng = np.random.default_rng(seed)
    idx = np.arange(data.n_samples, dtype=np.int64)
    for q in range(data.n_classes):
        members = np.flatnonzero(data.labels == q)
        if members.size:
            draws = rng.integers(0, members.size, size=members.size)
            idx[members] = members[draws]
    return data.subset(idx)
