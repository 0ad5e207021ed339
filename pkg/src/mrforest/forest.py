"""Forest training, majority-vote prediction, and model serialization.

Three variants share one prediction path: the multinomial forest, its
B1 = B2 = 0 completely-random limit, and a greedy bootstrap baseline whose
trees vote their majority class. Per-tree randomness comes from counter
-derived substreams of the master seed, so training is reproducible no
matter how trees are scheduled.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .data import Dataset, partition
from .errors import ConfigError
from .tree import Tree, build_baseline_tree, build_tree, tree_votes

__all__ = [
    "MrfConfig",
    "BaselineConfig",
    "Forest",
    "train_mrf",
    "train_baseline_rf",
    "predict",
    "predict_batch",
    "save_forest",
    "load_forest",
]

FOREST_FORMAT = "mrforest"
FOREST_VERSION = 1

# Spawn-key domain for per-tree rng substreams of the master seed.
_TREE_STREAM = 0


def _tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(_TREE_STREAM, index))
    )


@dataclass(frozen=True)
class MrfConfig:
    """Hyper-parameters of a multinomial forest.

    ``b1``, ``b2`` and ``b3`` may be ``math.inf``: infinite split budgets give
    greedy selection, infinite ``b3`` gives deterministic leaf labels.
    """

    b1: float = 10.0
    b2: float = 10.0
    b3: float = math.inf
    k: int = 5
    t: int = 100
    partition_rate: float = 1.0
    criterion: str = "gini"
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ConfigError(f"t must be >= 1, got {self.t}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        for name in ("b1", "b2", "b3"):
            value = getattr(self, name)
            if math.isnan(value) or value < 0:
                raise ConfigError(f"{name} must be nonnegative, got {value}")
        if self.partition_rate <= 0:
            raise ConfigError("partition_rate must be positive")
        if self.criterion not in ("gini", "entropy"):
            raise ConfigError(f"unknown criterion {self.criterion!r}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1 when set")


@dataclass(frozen=True)
class BaselineConfig:
    """Hyper-parameters of the greedy bootstrap baseline forest."""

    t: int = 100
    k: int = 5
    mtry: int | None = None
    bootstrap: bool = True
    criterion: str = "gini"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ConfigError(f"t must be >= 1, got {self.t}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be >= 1 when set")
        if self.criterion not in ("gini", "entropy"):
            raise ConfigError(f"unknown criterion {self.criterion!r}")


@dataclass(eq=False)
class Forest:
    trees: list[Tree]
    variant: str
    config: MrfConfig | BaselineConfig
    class_count: int
    label_values: tuple[str, ...]
    feature_names: tuple[str, ...] = field(default=())

    @property
    def b3(self) -> float:
        return self.config.b3 if isinstance(self.config, MrfConfig) else math.inf

    def to_dict(self) -> dict[str, Any]:
        config = {
            key: ("inf" if isinstance(value, float) and math.isinf(value) else value)
            for key, value in asdict(self.config).items()
        }
        return {
            "format": FOREST_FORMAT,
            "version": FOREST_VERSION,
            "variant": self.variant,
            "config": config,
            "class_count": self.class_count,
            "label_values": list(self.label_values),
            "feature_names": list(self.feature_names),
            "trees": [tree.to_dict() for tree in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Forest":
        if doc.get("format") != FOREST_FORMAT:
            raise ConfigError("not a mrforest model document")
        if doc.get("version") != FOREST_VERSION:
            raise ConfigError(f"unsupported model version {doc.get('version')!r}")
        raw = {
            key: (math.inf if value == "inf" else value)
            for key, value in doc["config"].items()
        }
        config_cls = BaselineConfig if doc["variant"] == "breiman" else MrfConfig
        return cls(
            trees=[Tree.from_dict(t) for t in doc["trees"]],
            variant=doc["variant"],
            config=config_cls(**raw),
            class_count=int(doc["class_count"]),
            label_values=tuple(doc["label_values"]),
            feature_names=tuple(doc["feature_names"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        return cls.from_dict(json.loads(text))


def train_mrf(dataset: Dataset, config: MrfConfig) -> Forest:
    """Train a multinomial forest: fresh partition plus one tree per substream."""
    if dataset.n < 2 * config.k:
        raise ConfigError(
            f"need n >= 2k for a leaf-capable partition, got n={dataset.n} k={config.k}"
        )
    trees = []
    for index in range(config.t):
        rng = _tree_rng(config.seed, index)
        part = partition(dataset, config.partition_rate, rng)
        trees.append(
            build_tree(
                dataset, part.structure_idx, part.estimation_idx, config, rng, seed=index
            )
        )
    variant = "completely_random" if config.b1 == 0 and config.b2 == 0 else "mrf"
    return Forest(
        trees=trees,
        variant=variant,
        config=config,
        class_count=dataset.class_count,
        label_values=dataset.label_values,
        feature_names=dataset.feature_names,
    )


def train_baseline_rf(dataset: Dataset, config: BaselineConfig) -> Forest:
    """Train the greedy baseline: bootstrap rows, sqrt-D feature draws per node."""
    feature_count = dataset.feature_count
    mtry = config.mtry if config.mtry is not None else max(1, int(math.isqrt(feature_count)))
    if mtry > feature_count:
        raise ConfigError(f"mtry={mtry} exceeds feature count {feature_count}")
    trees = []
    for index in range(config.t):
        rng = _tree_rng(config.seed, index)
        if config.bootstrap:
            rows = rng.integers(0, dataset.n, size=dataset.n)
        else:
            rows = np.arange(dataset.n)
        tree = build_baseline_tree(
            dataset.features[rows],
            dataset.labels[rows],
            dataset.class_count,
            config.k,
            mtry,
            config.criterion,
            rng,
        )
        tree.seed = index
        trees.append(tree)
    return Forest(
        trees=trees,
        variant="breiman",
        config=config,
        class_count=dataset.class_count,
        label_values=dataset.label_values,
        feature_names=dataset.feature_names,
    )


def predict_batch(
    forest: Forest, rows: np.ndarray, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Classes and the (t, n) per-tree vote matrix for a batch of rows.

    Votes are drawn tree by tree in row order, so a single-row batch consumes
    the rng identically to :func:`predict`. Ensemble ties break toward the
    lowest class index.
    """
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1) if x.size else x.reshape(0, 0)
    b3 = forest.b3
    if not math.isinf(b3) and rng is None:
        raise ConfigError("finite b3 prediction requires an rng")
    n = x.shape[0]
    votes = np.empty((len(forest.trees), n), dtype=np.int64)
    if n == 0:
        return np.empty(0, dtype=np.int64), votes
    for i, tree in enumerate(forest.trees):
        votes[i] = tree_votes(tree, x, b3, rng)
    tallies = np.zeros((forest.class_count, n), dtype=np.int64)
    cols = np.arange(n)
    for i in range(votes.shape[0]):
        tallies[votes[i], cols] += 1
    return np.argmax(tallies, axis=0), votes


def predict(
    forest: Forest, x: np.ndarray, rng: np.random.Generator | None = None
) -> int:
    """Majority vote over all trees for one row."""
    classes, _ = predict_batch(forest, np.atleast_2d(np.asarray(x, dtype=np.float64)), rng)
    return int(classes[0])


def save_forest(forest: Forest, path: str | Path) -> None:
    Path(path).write_text(forest.to_json(), encoding="utf-8")


def load_forest(path: str | Path) -> Forest:
    return Forest.from_json(Path(path).read_text(encoding="utf-8"))


def config_with_budget(config: MrfConfig, b1: float, b2: float, b3: float, depth_cap: int) -> MrfConfig:
    """Copy a config with mechanism budgets and the privacy depth cap applied."""
    return replace(config, b1=b1, b2=b2, b3=b3, max_depth=depth_cap)
