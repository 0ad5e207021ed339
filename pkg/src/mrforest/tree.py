"""Decision tree construction and prediction for multinomial random forests.

A tree is grown from structure rows only; estimation rows ride along and
set the per-leaf class distributions. Nodes keep per-feature index slices
sorted once at tree start and filtered downward, so each node's candidate
scan is one vectorized pass. Split selection composes the two multinomial
mechanisms; a sampled split is accepted only if both children keep at least
``k`` estimation rows and one structure row, with resampling (value first,
then feature, ten attempts total) before giving up and emitting a leaf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from .impurity import scan_features
from .splitsel import select_feature, select_value

if TYPE_CHECKING:
    from .data import Dataset
    from .forest import MrfConfig

__all__ = [
    "TreeNode",
    "Tree",
    "build_tree",
    "build_baseline_tree",
    "leaf_distribution",
    "predict_tree",
    "tree_depth",
    "route_eta",
    "tree_votes",
]

# Total (feature, value) samples tried per node before falling back to a leaf.
_SPLIT_ATTEMPTS = 10

TREE_FORMAT_VERSION = 1


@dataclass(eq=False)
class TreeNode:
    """Internal split node or leaf. Leaves have ``feature is None``."""

    depth: int
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    counts: np.ndarray | None = None
    eta: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass(eq=False)
class Tree:
    root: TreeNode
    depth: int
    params: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready form: a flat node array with child indices (root first).

        Flat instead of nested so pathologically deep trees survive the
        recursive json encoder and plain dict comparison.
        """
        nodes: list[dict[str, Any]] = []
        stack: list[tuple[TreeNode, dict[str, Any] | None, str]] = [(self.root, None, "")]
        while stack:
            node, parent_entry, side = stack.pop()
            index = len(nodes)
            if parent_entry is not None:
                parent_entry[side] = index
            if node.is_leaf:
                entry = {
                    "kind": "leaf",
                    "depth": node.depth,
                    "counts": [int(c) for c in node.counts],
                    "eta": [float(p) for p in node.eta],
                }
                nodes.append(entry)
            else:
                entry = {
                    "kind": "split",
                    "depth": node.depth,
                    "feature": int(node.feature),
                    "threshold": float(node.threshold),
                    "left": -1,
                    "right": -1,
                }
                nodes.append(entry)
                stack.append((node.right, entry, "right"))
                stack.append((node.left, entry, "left"))
        params = {
            key: ("inf" if isinstance(value, float) and math.isinf(value) else value)
            for key, value in self.params.items()
        }
        return {
            "version": TREE_FORMAT_VERSION,
            "nodes": nodes,
            "depth": self.depth,
            "params": params,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Tree":
        entries = doc["nodes"]
        nodes = [TreeNode(depth=int(entry["depth"])) for entry in entries]
        for node, entry in zip(nodes, entries):
            if entry["kind"] == "split":
                node.feature = int(entry["feature"])
                node.threshold = float(entry["threshold"])
                node.left = nodes[entry["left"]]
                node.right = nodes[entry["right"]]
            else:
                node.counts = np.asarray(entry["counts"], dtype=np.int64)
                node.eta = np.asarray(entry["eta"], dtype=np.float64)
        return cls(
            root=nodes[0],
            depth=int(doc["depth"]),
            params={
                key: (math.inf if value == "inf" else value)
                for key, value in doc.get("params", {}).items()
            },
            seed=doc.get("seed"),
        )


def leaf_distribution(
    labels: np.ndarray, class_count: int, parent: np.ndarray | None = None
) -> np.ndarray:
    """Empirical class distribution of a leaf's estimation labels.

    An empty leaf inherits its parent's distribution; with no parent either,
    the distribution is uniform.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        if parent is not None:
            return np.asarray(parent, dtype=np.float64)
        return np.full(class_count, 1.0 / class_count)
    counts = np.bincount(labels, minlength=class_count)
    return counts / labels.size


def _sorted_index_matrix(x: np.ndarray) -> np.ndarray:
    # row j of the result lists row positions sorted by feature j
    return np.argsort(x, axis=0, kind="stable").T.copy()


def _gather_sorted(
    x: np.ndarray, sorted_pos: np.ndarray, features: np.ndarray | None = None
) -> np.ndarray:
    # row i of sorted_pos holds positions sorted by features[i] (default: 0..D-1)
    if features is None:
        cols = np.arange(sorted_pos.shape[0])[:, None]
    else:
        cols = np.asarray(features)[:, None]
    return x[sorted_pos, cols]


def build_tree(
    dataset: "Dataset",
    structure_idx: np.ndarray,
    estimation_idx: np.ndarray,
    config: "MrfConfig",
    rng: np.random.Generator,
    seed: int | None = None,
) -> Tree:
    """Grow one multinomial tree from a structure/estimation row split.

    Recursion gate: a node splits only while it holds more than ``k``
    estimation rows, at least two structure rows with a non-constant feature,
    and (in privacy mode) depth below the configured cap. All degenerate
    paths resolve to leaves.
    """
    xs = np.ascontiguousarray(dataset.features[structure_idx])
    ys = dataset.labels[structure_idx]
    xe = np.ascontiguousarray(dataset.features[estimation_idx])
    ye = dataset.labels[estimation_idx]
    class_count = dataset.class_count
    n_struct = xs.shape[0]
    k = config.k
    max_depth = config.max_depth

    member = np.zeros(n_struct, dtype=bool)  # scratch for sorted-slice filtering
    root = TreeNode(depth=0)
    tree_max_depth = 0
    stack: list[tuple[TreeNode, np.ndarray, np.ndarray, np.ndarray | None]] = [
        (root, _sorted_index_matrix(xs), np.arange(xe.shape[0]), None)
    ]

    while stack:
        node, sorted_pos, est_pos, parent_eta = stack.pop()
        m = sorted_pos.shape[1]
        split = None
        if (
            est_pos.size > k
            and m >= 2
            and (max_depth is None or node.depth < max_depth)
        ):
            split = _sample_split(
                xs, ys, xe, sorted_pos, est_pos, class_count, config, rng
            )
        if split is None:
            node.counts = np.bincount(ye[est_pos], minlength=class_count)
            node.eta = leaf_distribution(ye[est_pos], class_count, parent_eta)
            tree_max_depth = max(tree_max_depth, node.depth)
            continue

        feature, threshold, est_left_mask = split
        node.feature = feature
        node.threshold = float(threshold)
        node.left = TreeNode(depth=node.depth + 1)
        node.right = TreeNode(depth=node.depth + 1)

        rows = sorted_pos[0]
        left_rows = rows[xs[rows, feature] <= threshold]
        member[left_rows] = True
        keep = member[sorted_pos]
        member[left_rows] = False
        left_sorted = sorted_pos[keep].reshape(sorted_pos.shape[0], left_rows.size)
        right_sorted = sorted_pos[~keep].reshape(
            sorted_pos.shape[0], m - left_rows.size
        )

        node_eta = leaf_distribution(ye[est_pos], class_count, parent_eta)
        stack.append((node.left, left_sorted, est_pos[est_left_mask], node_eta))
        stack.append((node.right, right_sorted, est_pos[~est_left_mask], node_eta))

    return Tree(
        root=root,
        depth=tree_max_depth,
        params={
            "variant": "mrf",
            "b1": config.b1,
            "b2": config.b2,
            "k": config.k,
            "criterion": config.criterion,
            "max_depth": config.max_depth,
        },
        seed=seed,
    )


def _sample_split(
    xs: np.ndarray,
    ys: np.ndarray,
    xe: np.ndarray,
    sorted_pos: np.ndarray,
    est_pos: np.ndarray,
    class_count: int,
    config: "MrfConfig",
    rng: np.random.Generator,
) -> tuple[int, float, np.ndarray] | None:
    """Draw (feature, threshold) via the two mechanisms, enforcing split validity.

    Returns None when no valid split was sampled within the attempt budget.
    """
    valid, thresholds, decreases = scan_features(
        _gather_sorted(xs, sorted_pos), ys[sorted_pos], class_count, config.criterion
    )
    best = np.where(valid, decreases, -np.inf).max(axis=1)
    eligible = np.flatnonzero(best > -np.inf)
    if eligible.size == 0:
        return None

    k = config.k
    est_col_cache: dict[int, np.ndarray] = {}
    feature = -1
    for attempt in range(_SPLIT_ATTEMPTS):
        if attempt % 2 == 0:  # even attempts redraw the feature, odd ones the value
            feature = int(eligible[select_feature(best[eligible], config.b1, rng)])
        positions = np.flatnonzero(valid[feature])
        choice = select_value(decreases[feature, positions], config.b2, rng)
        threshold = thresholds[feature, positions[choice]]
        if feature not in est_col_cache:
            est_col_cache[feature] = xe[est_pos, feature]
        est_left = est_col_cache[feature] <= threshold
        left_n = int(est_left.sum())
        # structure children are nonempty by construction: valid thresholds
        # lie strictly between two observed structure values
        if left_n >= k and est_pos.size - left_n >= k:
            return feature, float(threshold), est_left
    return None


def build_baseline_tree(
    x: np.ndarray,
    y: np.ndarray,
    class_count: int,
    k: int,
    mtry: int,
    criterion: str,
    rng: np.random.Generator,
) -> Tree:
    """Greedy CART tree over (possibly bootstrapped) rows.

    Each node draws ``mtry`` features without replacement and takes the
    candidate with the largest impurity decrease, breaking ties toward the
    lowest feature index and then the lowest threshold. Nodes stop when pure
    or at most ``k`` rows remain; leaves predict their majority class.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, feature_count = x.shape
    member = np.zeros(n, dtype=bool)
    root = TreeNode(depth=0)
    tree_max_depth = 0
    stack = [(root, _sorted_index_matrix(x))]

    while stack:
        node, sorted_pos = stack.pop()
        rows = sorted_pos[0]
        m = rows.size
        counts = np.bincount(y[rows], minlength=class_count)
        split = None
        if m > k and counts.max() < m:
            subset = np.sort(rng.choice(feature_count, size=mtry, replace=False))
            valid, thresholds, decreases = scan_features(
                _gather_sorted(x, sorted_pos[subset], subset),
                y[sorted_pos[subset]],
                class_count,
                criterion,
            )
            masked = np.where(valid, decreases, -np.inf)
            if np.isfinite(masked.max()):
                # first flat argmax = lowest feature, then lowest threshold
                flat = int(np.argmax(masked))
                feat_row, pos = divmod(flat, masked.shape[1])
                split = (int(subset[feat_row]), float(thresholds[feat_row, pos]))

        if split is None:
            node.counts = counts
            node.eta = counts / m
            tree_max_depth = max(tree_max_depth, node.depth)
            continue

        feature, threshold = split
        node.feature = feature
        node.threshold = threshold
        node.left = TreeNode(depth=node.depth + 1)
        node.right = TreeNode(depth=node.depth + 1)
        left_rows = rows[x[rows, feature] <= threshold]
        member[left_rows] = True
        keep = member[sorted_pos]
        member[left_rows] = False
        stack.append(
            (node.left, sorted_pos[keep].reshape(sorted_pos.shape[0], left_rows.size))
        )
        stack.append(
            (
                node.right,
                sorted_pos[~keep].reshape(sorted_pos.shape[0], m - left_rows.size),
            )
        )

    return Tree(
        root=root,
        depth=tree_max_depth,
        params={"variant": "breiman", "k": k, "mtry": mtry, "criterion": criterion},
    )


def route_eta(tree: Tree, x: np.ndarray) -> np.ndarray:
    """Leaf class distribution for each query row (left iff value <= threshold)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    probe = tree.root
    while not probe.is_leaf:
        probe = probe.left
    out = np.empty((n, probe.eta.size))
    stack: list[tuple[TreeNode, np.ndarray]] = [(tree.root, np.arange(n))]
    while stack:
        node, idx = stack.pop()
        if node.is_leaf:
            out[idx] = node.eta
            continue
        go_left = x[idx, node.feature] <= node.threshold
        stack.append((node.left, idx[go_left]))
        stack.append((node.right, idx[~go_left]))
    return out


def tree_votes(
    tree: Tree, x: np.ndarray, b3: float, rng: np.random.Generator | None
) -> np.ndarray:
    """One class vote per query row.

    Finite ``b3`` draws each vote with probability proportional to
    exp(b3 * eta_c / 2); infinite ``b3`` takes the argmax class with
    lowest-index tie-breaking and consumes no randomness.
    """
    eta = route_eta(tree, x)
    if math.isinf(b3):
        return np.argmax(eta, axis=1)
    if rng is None:
        raise ValueError("finite b3 prediction needs an rng")
    z = 0.5 * b3 * eta
    z -= z.max(axis=1, keepdims=True)
    probs = np.exp(z)
    probs /= probs.sum(axis=1, keepdims=True)
    cum = np.cumsum(probs, axis=1)
    draws = (cum <= rng.random(eta.shape[0])[:, None]).sum(axis=1)
    return np.minimum(draws, eta.shape[1] - 1)


def predict_tree(
    tree: Tree, x: np.ndarray, b3: float, rng: np.random.Generator | None = None
) -> int:
    """Predict one row with the tree's exponential-mechanism label draw."""
    return int(tree_votes(tree, np.atleast_2d(x), b3, rng)[0])


def tree_depth(tree: Tree) -> int:
    """Maximum leaf depth; a root-only tree has depth 0."""
    return tree.depth
