"""Privacy budget allocation and exhaustive mechanism audits.

The budget math follows the per-tree accounting: the two split mechanisms
compose sequentially across a tree's layers, structure and estimation phases
compose in parallel (max), and trees compose sequentially again.

The auditors check the exponential-mechanism ratio bound directly: enumerate
every neighbor of a micro-dataset (one record replaced from a grid, or one
record removed), compute both output distributions in closed form, and report
the worst probability ratio against e^B. Output spaces are held fixed across
neighbors; where a neighbor would naturally induce a different candidate
threshold set, the auditor counts the mismatch instead of hiding it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .data import Dataset
from .errors import DomainError, SizeError
from .impurity import ClassCounts, _impurity_of, scan_features
from .splitsel import normalize, softmax_scaled

__all__ = [
    "PrivacyBudget",
    "AuditReport",
    "Neighborhood",
    "allocate_budget",
    "compose_budget",
    "enumerate_neighbors",
    "audit_feature_mechanism",
    "audit_value_mechanism",
    "audit_label_mechanism",
]

# Exhaustive enumeration stays cheap only for genuinely tiny datasets.
_MAX_AUDIT_ROWS = 32

_PASS_SLACK = 1e-9


@dataclass(frozen=True)
class PrivacyBudget:
    """Total budget epsilon split across t trees and d layers per tree."""

    epsilon: float
    t: int
    d: int
    b1: float
    b2: float
    b3: float


@dataclass(frozen=True)
class AuditReport:
    mechanism: str
    budget: float
    worst_ratio: float
    bound: float
    passed: bool
    witness: dict[str, Any]
    neighbor_count: int
    candidate_mismatches: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "mechanism": self.mechanism,
            "budget": self.budget,
            "worst_ratio": self.worst_ratio,
            "bound": self.bound,
            "passed": self.passed,
            "witness": self.witness,
            "neighbor_count": self.neighbor_count,
            "candidate_mismatches": self.candidate_mismatches,
        }


def allocate_budget(
    epsilon: float, t: int, estimation_size: int, k: int, split: float = 0.5
) -> PrivacyBudget:
    """Derive per-mechanism budgets from a total epsilon.

    The depth cap is d = ceil(estimation_size / k); each of a tree's d layers
    gets epsilon/(d*t) shared between the two split mechanisms according to
    ``split``, and each tree's label mechanism gets epsilon/t.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    if t < 1 or estimation_size < 1 or k < 1:
        raise DomainError("t, estimation_size and k must be positive")
    if not 0 < split < 1:
        raise DomainError("split must lie strictly between 0 and 1")
    depth_cap = math.ceil(estimation_size / k)
    per_layer = epsilon / (depth_cap * t)
    return PrivacyBudget(
        epsilon=epsilon,
        t=t,
        d=depth_cap,
        b1=split * per_layer,
        b2=(1.0 - split) * per_layer,
        b3=epsilon / t,
    )


def compose_budget(per_layer: float, depth: int, b3: float, t: int) -> float:
    """Total epsilon consumed: sequential across layers and trees, parallel phases.

    Per tree the structure phase spends depth * (b1 + b2) and the disjoint
    estimation phase spends b3; their max is the tree's cost, times t trees.
    """
    if per_layer < 0 or b3 < 0 or depth < 0 or t < 0:
        raise DomainError("budget components must be nonnegative")
    return t * max(depth * per_layer, b3)


@dataclass
class Neighborhood:
    """Base dataset plus every enumerated neighbor's arrays and description.

    ``score_cache`` memoizes the budget-independent quality scores so auditing
    the same neighborhood at several budgets enumerates only once.
    """

    features: np.ndarray
    labels: np.ndarray
    neighbors: tuple[tuple[dict[str, Any], np.ndarray, np.ndarray], ...]
    score_cache: dict[Any, Any] = field(default_factory=dict, repr=False)


def enumerate_neighbors(
    micro: Dataset,
    replacement_records: Sequence[tuple[np.ndarray, int]] | None = None,
) -> Neighborhood:
    """All datasets differing from ``micro`` in one record.

    Replace-one neighbors swap one row for each record in
    ``replacement_records`` (default: every observed row paired with every
    observed label); remove-one neighbors drop one row. Both variants are
    enumerated so the stricter of bounded/unbounded adjacency is audited.
    """
    if micro.n > _MAX_AUDIT_ROWS:
        raise SizeError(f"audit supports at most {_MAX_AUDIT_ROWS} rows, got {micro.n}")
    x, y = micro.features, micro.labels
    if replacement_records is None:
        observed_labels = np.unique(y)
        replacement_records = [
            (x[i], int(label)) for i in range(micro.n) for label in observed_labels
        ]
    neighbors: list[tuple[dict[str, Any], np.ndarray, np.ndarray]] = []
    for row in range(micro.n):
        for rec_idx, (features, label) in enumerate(replacement_records):
            if label == y[row] and np.array_equal(features, x[row]):
                continue
            x2 = x.copy()
            y2 = y.copy()
            x2[row] = features
            y2[row] = label
            neighbors.append(({"kind": "replace", "row": row, "record": rec_idx}, x2, y2))
        if micro.n > 1:
            keep = np.arange(micro.n) != row
            neighbors.append(({"kind": "remove", "row": row}, x[keep], y[keep]))
    return Neighborhood(features=x, labels=y, neighbors=tuple(neighbors))


def _root_feature_scores(
    x: np.ndarray, y: np.ndarray, class_count: int, criterion: str
) -> np.ndarray:
    """Per-feature best impurity decrease at the root; 0 for constant features."""
    if x.shape[0] < 2:
        return np.zeros(x.shape[1])
    sorted_pos = np.argsort(x, axis=0, kind="stable").T
    cols = np.arange(x.shape[1])[:, None]
    valid, _, decreases = scan_features(
        x[sorted_pos, cols], y[sorted_pos], class_count, criterion
    )
    best = np.where(valid, decreases, -np.inf).max(axis=1)
    return np.where(np.isfinite(best), best, 0.0)


def _grid_value_scores(
    x: np.ndarray,
    y: np.ndarray,
    feature: int,
    grid: np.ndarray,
    class_count: int,
    criterion: str,
) -> np.ndarray:
    """Impurity decrease of each grid threshold; 0 where a side is empty."""
    n = x.shape[0]
    if n == 0:
        return np.zeros(grid.size)
    left_mask = x[:, feature][None, :] <= grid[:, None]
    onehot = (y[:, None] == np.arange(class_count)).astype(np.int64)
    left_counts = left_mask @ onehot
    total = onehot.sum(axis=0)
    left_n = left_mask.sum(axis=1)
    right_n = n - left_n
    parent_imp = _impurity_of(total, np.asarray(n), criterion)
    child = left_n / n * _impurity_of(left_counts, left_n, criterion) + (
        right_n / n
    ) * _impurity_of(total[None, :] - left_counts, right_n, criterion)
    decreases = np.where((left_n > 0) & (right_n > 0), parent_imp - child, 0.0)
    return np.maximum(decreases, 0.0)


def _candidate_thresholds(x: np.ndarray, feature: int) -> np.ndarray:
    values = np.unique(x[:, feature])
    return 0.5 * (values[:-1] + values[1:])


def _ratio_report(
    mechanism: str,
    budget: float,
    base_probs: np.ndarray,
    neighbor_probs: list[np.ndarray],
    descriptions: list[dict[str, Any]],
    candidate_mismatches: int = 0,
) -> AuditReport:
    worst = 1.0
    witness: dict[str, Any] = {}
    for desc, probs in zip(descriptions, neighbor_probs):
        ratio = np.maximum(base_probs / probs, probs / base_probs)
        idx = int(np.argmax(ratio))
        if ratio[idx] > worst:
            worst = float(ratio[idx])
            witness = {"neighbor": desc, "output": idx, "ratio": worst}
    bound = math.exp(budget)
    return AuditReport(
        mechanism=mechanism,
        budget=budget,
        worst_ratio=worst,
        bound=bound,
        passed=worst <= bound * (1.0 + _PASS_SLACK),
        witness=witness,
        neighbor_count=len(neighbor_probs),
        candidate_mismatches=candidate_mismatches,
    )


def _selection_probs(scores: np.ndarray, budget: float) -> np.ndarray:
    return softmax_scaled(normalize(scores), budget)


def audit_feature_mechanism(
    micro: Dataset,
    b1: float,
    criterion: str = "gini",
    neighborhood: Neighborhood | None = None,
) -> AuditReport:
    """Worst-case selection-probability ratio of the split-feature mechanism.

    The output space is the fixed feature set; each dataset's quality scores
    are its own per-feature best impurity decreases at the root.
    """
    if not math.isfinite(b1) or b1 < 0:
        raise DomainError("b1 must be finite and nonnegative")
    neigh = neighborhood or enumerate_neighbors(micro)
    class_count = micro.class_count
    key = ("feature", criterion)
    if key not in neigh.score_cache:
        neigh.score_cache[key] = (
            _root_feature_scores(neigh.features, neigh.labels, class_count, criterion),
            [
                _root_feature_scores(x2, y2, class_count, criterion)
                for _, x2, y2 in neigh.neighbors
            ],
        )
    base_scores, neighbor_scores = neigh.score_cache[key]
    base = _selection_probs(base_scores, b1)
    descs = [desc for desc, _, _ in neigh.neighbors]
    probs = [_selection_probs(s, b1) for s in neighbor_scores]
    return _ratio_report("feature", b1, base, probs, descs)


def audit_value_mechanism(
    micro: Dataset,
    feature: int,
    b2: float,
    criterion: str = "gini",
    neighborhood: Neighborhood | None = None,
    grid: np.ndarray | None = None,
) -> AuditReport:
    """Worst-case ratio of the split-value mechanism over a fixed threshold grid.

    The grid defaults to the base dataset's candidate midpoints for
    ``feature``. Neighbors whose own candidate set differs from the grid are
    counted in ``candidate_mismatches``: the ratio bound is only meaningful
    on the shared output space, and the count sizes that gap.
    """
    if not math.isfinite(b2) or b2 < 0:
        raise DomainError("b2 must be finite and nonnegative")
    neigh = neighborhood or enumerate_neighbors(micro)
    if grid is None:
        grid = _candidate_thresholds(neigh.features, feature)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise DomainError("feature has no candidate thresholds to audit")
    class_count = micro.class_count
    key = ("value", feature, criterion, grid.tobytes())
    if key not in neigh.score_cache:
        neighbor_scores = []
        mismatches = 0
        for _, x2, y2 in neigh.neighbors:
            neighbor_scores.append(
                _grid_value_scores(x2, y2, feature, grid, class_count, criterion)
            )
            own = _candidate_thresholds(x2, feature)
            if own.size != grid.size or not np.allclose(own, grid):
                mismatches += 1
        neigh.score_cache[key] = (
            _grid_value_scores(
                neigh.features, neigh.labels, feature, grid, class_count, criterion
            ),
            neighbor_scores,
            mismatches,
        )
    base_scores, neighbor_scores, mismatches = neigh.score_cache[key]
    base = _selection_probs(base_scores, b2)
    descs = [desc for desc, _, _ in neigh.neighbors]
    probs = [_selection_probs(s, b2) for s in neighbor_scores]
    return _ratio_report("value", b2, base, probs, descs, candidate_mismatches=mismatches)


def audit_label_mechanism(leaf_counts: ClassCounts, b3: float) -> AuditReport:
    """Worst-case ratio of the leaf-label mechanism over count-vector neighbors.

    Neighbors change one record's label or remove one record; removals that
    would empty the leaf are skipped since the mechanism is undefined there.
    """
    if not math.isfinite(b3) or b3 < 0:
        raise DomainError("b3 must be finite and nonnegative")
    counts = leaf_counts.counts
    total = leaf_counts.total
    if total < 1:
        raise DomainError("cannot audit an empty leaf")

    def probs_of(c: np.ndarray) -> np.ndarray:
        eta = c / c.sum()
        z = 0.5 * b3 * eta
        z -= z.max()
        e = np.exp(z)
        return e / e.sum()

    base = probs_of(counts)
    descs, probs = [], []
    for i in range(counts.size):
        if counts[i] == 0:
            continue
        for j in range(counts.size):
            if j == i:
                continue
            changed = counts.copy()
            changed[i] -= 1
            changed[j] += 1
            descs.append({"kind": "relabel", "from": i, "to": j})
            probs.append(probs_of(changed))
        if total > 1:
            removed = counts.copy()
            removed[i] -= 1
            descs.append({"kind": "remove", "label": i})
            probs.append(probs_of(removed))
    return _ratio_report("label", b3, base, probs, descs)
