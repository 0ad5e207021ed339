"""Impurity criteria, impurity decrease, and candidate split enumeration.

The hot path is :func:`scan_features`: given per-feature pre-sorted value and
label rows for one tree node, it computes the impurity decrease of every
candidate threshold for every feature in one vectorized pass over prefix
class counts. Thresholds sit at midpoints between adjacent distinct values,
so rows with equal feature values are never separated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyChild, EmptyNode, MismatchError

__all__ = [
    "ClassCounts",
    "SplitCandidate",
    "impurity",
    "impurity_decrease",
    "candidate_splits",
    "scan_features",
]

# Decreases this far below zero are rounding noise from Eq-style weighted sums.
_NEG_TOL = 1e-12

# Cap on floats held by one vectorized scan block (D_block * m * K).
_SCAN_BLOCK_BUDGET = 4 << 20


@dataclass(frozen=True)
class ClassCounts:
    """Per-class sample tally at a node."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or (counts < 0).any():
            raise MismatchError("counts must be a 1-D nonnegative vector")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_labels(cls, labels: np.ndarray, class_count: int) -> "ClassCounts":
        return cls(np.bincount(np.asarray(labels, dtype=np.int64), minlength=class_count))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class SplitCandidate:
    """A (feature, threshold) pair and the impurity decrease it achieves."""

    feature: int
    threshold: float
    decrease: float


def _impurity_of(counts: np.ndarray, totals: np.ndarray, criterion: str) -> np.ndarray:
    """Vectorized impurity of count vectors along the last axis.

    ``totals`` must be positive wherever the result is used.
    """
    safe = np.maximum(totals, 1)
    if criterion == "gini":
        return 1.0 - np.square(counts / safe[..., None]).sum(axis=-1)
    if criterion == "entropy":
        # H = log2(n) - sum(c*log2 c)/n with 0*log 0 = 0
        clog = np.where(counts > 0, counts * np.log2(np.maximum(counts, 1)), 0.0)
        return np.log2(safe) - clog.sum(axis=-1) / safe
    raise ConfigError(f"unknown impurity criterion {criterion!r}")


def impurity(counts: ClassCounts, criterion: str = "gini") -> float:
    """Gini or Shannon-entropy impurity of one class tally."""
    total = counts.total
    if total == 0:
        raise EmptyNode("impurity of an empty node is undefined")
    return float(_impurity_of(counts.counts, np.asarray(total), criterion))


def impurity_decrease(
    parent: ClassCounts,
    left: ClassCounts,
    right: ClassCounts,
    criterion: str = "gini",
) -> float:
    """Parent impurity minus the size-weighted child impurities."""
    if left.total == 0 or right.total == 0:
        raise EmptyChild("both children must be nonempty")
    if not np.array_equal(left.counts + right.counts, parent.counts):
        raise MismatchError("child counts must sum to parent counts")
    n = parent.total
    value = (
        impurity(parent, criterion)
        - left.total / n * impurity(left, criterion)
        - right.total / n * impurity(right, criterion)
    )
    if -_NEG_TOL < value < 0.0:
        return 0.0
    return value


def scan_features(
    values: np.ndarray,
    labels: np.ndarray,
    class_count: int,
    criterion: str = "gini",
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Candidate thresholds and decreases for every feature row of a node.

    Args:
        values: (D, m) matrix; each row holds one feature's values over the
            node's rows, sorted ascending.
        labels: (D, m) labels aligned with ``values`` row by row.
        class_count: number of classes K.
        criterion: "gini" or "entropy".

    Returns:
        ``(valid, thresholds, decreases)``, each (D, m-1): position i describes
        the cut between sorted positions i and i+1. ``valid`` is False where
        adjacent values are equal (no threshold exists there).
    """
    depth, m = values.shape
    if m < 2:
        empty = np.empty((depth, 0))
        return empty.astype(bool), empty, empty

    valid = values[:, 1:] > values[:, :-1]
    thresholds = 0.5 * (values[:, :-1] + values[:, 1:])
    # the midpoint of adjacent doubles can round up onto the upper value,
    # which would route every row left; such cuts are not usable thresholds
    valid &= thresholds < values[:, 1:]
    decreases = np.empty((depth, m - 1))

    rows_per_block = max(1, _SCAN_BLOCK_BUDGET // (m * class_count))
    left_n = np.arange(1, m, dtype=np.int64)
    right_n = m - left_n
    for start in range(0, depth, rows_per_block):
        block = slice(start, min(start + rows_per_block, depth))
        onehot = labels[block, :, None] == np.arange(class_count)
        prefix = np.cumsum(onehot, axis=1, dtype=np.int64)
        total = prefix[:, -1, :]
        left = prefix[:, :-1, :]
        right = total[:, None, :] - left
        parent_imp = _impurity_of(total, np.asarray(m), criterion)
        child = (
            left_n / m * _impurity_of(left, left_n, criterion)
            + right_n / m * _impurity_of(right, right_n, criterion)
        )
        decreases[block] = parent_imp[:, None] - child

    np.copyto(decreases, 0.0, where=(decreases < 0.0) & (decreases > -_NEG_TOL))
    return valid, thresholds, decreases


def candidate_splits(
    features: np.ndarray,
    labels: np.ndarray,
    feature: int,
    class_count: int,
    criterion: str = "gini",
) -> list[SplitCandidate]:
    """All candidate splits of one feature over the given rows.

    One candidate per adjacent pair of distinct sorted values; a feature that
    is constant on the node yields an empty list.
    """
    column = np.asarray(features, dtype=np.float64)
    if column.ndim == 2:
        column = column[:, feature]
    labels = np.asarray(labels, dtype=np.int64)
    order = np.argsort(column, kind="stable")
    valid, thresholds, decreases = scan_features(
        column[order][None, :], labels[order][None, :], class_count, criterion
    )
    take = np.nonzero(valid[0])[0]
    return [
        SplitCandidate(feature=feature, threshold=float(thresholds[0, i]), decrease=float(decreases[0, i]))
        for i in take
    ]
