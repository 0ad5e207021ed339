"""Dataset ingestion, structure/estimation partitioning, and fold planning.

A :class:`Dataset` is an immutable table of finite real features plus dense
integer class labels. Trees never see raw files: the loader normalizes labels
to ``0..K-1`` (first-appearance order) and records the original values so
reports can translate back.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .errors import EmptyError, ParseError, SchemaError, SizeError

__all__ = [
    "Dataset",
    "Partition",
    "FoldPlan",
    "load_dataset",
    "partition",
    "structure_size",
    "make_folds",
]


@dataclass(frozen=True)
class Dataset:
    """Immutable classification dataset.

    Attributes:
        features: (n, D) float64 matrix, all values finite.
        labels: (n,) int64 vector with values in [0, class_count).
        feature_names: D column names.
        class_count: number of classes K (>= 2).
        label_values: original label value per dense class index, for reports.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    class_count: int
    label_values: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise EmptyError("features must be a nonempty 2-D matrix")
        if labels.shape != (features.shape[0],):
            raise SchemaError("labels must be one value per feature row")
        if not np.isfinite(features).all():
            raise ParseError("features contain NaN or infinite values")
        if self.class_count < 2:
            raise SchemaError(f"need at least 2 classes, got {self.class_count}")
        if labels.min() < 0 or labels.max() >= self.class_count:
            raise SchemaError("labels must lie in [0, class_count)")
        if len(self.feature_names) != features.shape[1]:
            raise SchemaError("feature_names must match feature count")
        label_values = self.label_values or tuple(
            str(c) for c in range(self.class_count)
        )
        if len(label_values) != self.class_count:
            raise SchemaError("label_values must have one entry per class")
        features.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "label_values", label_values)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def feature_count(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        """Row subset sharing this dataset's schema (K and names unchanged)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx],
            labels=self.labels[idx],
            feature_names=self.feature_names,
            class_count=self.class_count,
            label_values=self.label_values,
        )


@dataclass(frozen=True)
class Partition:
    """Disjoint structure/estimation row index sets over one dataset."""

    structure_idx: np.ndarray
    estimation_idx: np.ndarray
    rate: float

    def __post_init__(self) -> None:
        s = np.asarray(self.structure_idx, dtype=np.int64)
        e = np.asarray(self.estimation_idx, dtype=np.int64)
        if s.size == 0 or e.size == 0:
            raise SizeError("both partition sides must be nonempty")
        if np.intersect1d(s, e).size != 0:
            raise SizeError("structure and estimation sets must be disjoint")
        s.flags.writeable = False
        e.flags.writeable = False
        object.__setattr__(self, "structure_idx", s)
        object.__setattr__(self, "estimation_idx", e)


class FoldPlan:
    """Repeated k-fold assignment: per repeat, disjoint test folds covering 0..n-1.

    Train indices are derived on demand, so the serialized form stores only
    the test folds.
    """

    def __init__(self, n: int, test_folds: Sequence[Sequence[np.ndarray]]):
        self.n = int(n)
        self.test_folds = [
            [np.asarray(f, dtype=np.int64) for f in repeat] for repeat in test_folds
        ]
        self.repeats = len(self.test_folds)
        self.folds = len(self.test_folds[0]) if self.repeats else 0
        self._validate()

    def _validate(self) -> None:
        if self.repeats < 1 or self.folds < 2:
            raise SizeError("need at least 1 repeat and 2 folds")
        sizes = []
        for repeat in self.test_folds:
            if len(repeat) != self.folds:
                raise SizeError("ragged fold plan")
            stacked = np.concatenate(repeat)
            if stacked.size != self.n or not np.array_equal(
                np.sort(stacked), np.arange(self.n)
            ):
                raise SizeError("test folds must partition 0..n-1")
            sizes.extend(len(f) for f in repeat)
        if max(sizes) - min(sizes) > 1:
            raise SizeError("fold sizes must differ by at most 1")

    def test(self, repeat: int, fold: int) -> np.ndarray:
        return self.test_folds[repeat][fold]

    def train(self, repeat: int, fold: int) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.test_folds[repeat][fold]] = False
        return np.nonzero(mask)[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "repeats": self.repeats,
                "folds": self.folds,
                "test_folds": [
                    [f.tolist() for f in repeat] for repeat in self.test_folds
                ],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "FoldPlan":
        doc = json.loads(text)
        return cls(doc["n"], doc["test_folds"])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FoldPlan):
            return NotImplemented
        return self.n == other.n and all(
            np.array_equal(a, b)
            for ra, rb in zip(self.test_folds, other.test_folds, strict=True)
            for a, b in zip(ra, rb, strict=True)
        )


def _parse_cell(text: str, row: int, col: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"row {row}, column {col!r}: cannot parse {text!r}") from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}, column {col!r}: non-finite value {text!r}")
    return value


def load_dataset(
    source: str | Path | IO[str] | IO[bytes],
    label_col: str | int | None = None,
    delimiter: str = ",",
) -> Dataset:
    """Load a delimited text file with a header row into a Dataset.

    ``label_col`` selects the label column by header name or position
    (default: last column). All other columns must parse as finite reals;
    categorical features must be pre-encoded as numbers. Labels may be
    arbitrary strings and are densely re-indexed in first-appearance order.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", newline="", encoding="utf-8") as handle:
            return load_dataset(handle, label_col=label_col, delimiter=delimiter)
    if isinstance(source, io.BufferedIOBase) or (
        hasattr(source, "read") and isinstance(source.read(0), bytes)
    ):
        source = io.TextIOWrapper(source, encoding="utf-8")  # type: ignore[arg-type]

    reader = csv.reader(source, delimiter=delimiter)  # type: ignore[arg-type]
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyError("input has no header row") from None
    header = [h.strip() for h in header]
    if len(header) < 2:
        raise SchemaError("need at least one feature column and one label column")

    if label_col is None:
        label_pos = len(header) - 1
    elif isinstance(label_col, int):
        if not -len(header) <= label_col < len(header):
            raise SchemaError(f"label column index {label_col} out of range")
        label_pos = label_col % len(header)
    else:
        try:
            label_pos = header.index(label_col)
        except ValueError:
            raise SchemaError(f"label column {label_col!r} not in header") from None

    feature_pos = [i for i in range(len(header)) if i != label_pos]
    rows: list[list[float]] = []
    raw_labels: list[str] = []
    for line_no, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise ParseError(
                f"row {line_no}: expected {len(header)} cells, got {len(row)}"
            )
        rows.append([_parse_cell(row[i].strip(), line_no, header[i]) for i in feature_pos])
        raw_labels.append(row[label_pos].strip())

    if not rows:
        raise EmptyError("input has no data rows")

    mapping: dict[str, int] = {}
    labels = np.empty(len(raw_labels), dtype=np.int64)
    for i, value in enumerate(raw_labels):
        labels[i] = mapping.setdefault(value, len(mapping))
    if len(mapping) < 2:
        raise SchemaError(f"need at least 2 classes, found {len(mapping)}")

    return Dataset(
        features=np.asarray(rows, dtype=np.float64),
        labels=labels,
        feature_names=tuple(header[i] for i in feature_pos),
        class_count=len(mapping),
        label_values=tuple(mapping.keys()),
    )


def structure_size(n: int, rate: float) -> int:
    """Structure-side size: round-half-up of n*rate/(1+rate)."""
    return int(math.floor(n * rate / (1.0 + rate) + 0.5))


def partition(dataset: Dataset, rate: float, rng: np.random.Generator) -> Partition:
    """Uniformly random disjoint structure/estimation split of all rows.

    ``rate`` is |structure| / |estimation|; the structure side receives
    round-half-up of n*rate/(1+rate) rows and the remainder estimates leaves.
    """
    if rate <= 0:
        raise SizeError(f"partition rate must be positive, got {rate}")
    n = dataset.n
    n_struct = structure_size(n, rate)
    if n_struct < 1 or n - n_struct < 1:
        raise SizeError(
            f"partition of n={n} at rate={rate} would leave one side empty"
        )
    perm = rng.permutation(n)
    return Partition(
        structure_idx=np.sort(perm[:n_struct]),
        estimation_idx=np.sort(perm[n_struct:]),
        rate=float(rate),
    )


def make_folds(
    n: int, folds: int, repeats: int, rng: np.random.Generator
) -> FoldPlan:
    """Plan ``repeats`` independent shuffles of ``folds``-fold cross validation."""
    if repeats < 1:
        raise SizeError("repeats must be >= 1")
    if folds < 2 or folds > n:
        raise SizeError(f"folds must satisfy 2 <= folds <= n, got folds={folds} n={n}")
    plans: list[list[np.ndarray]] = []
    for _ in range(repeats):
        perm = rng.permutation(n)
        plans.append([np.sort(chunk) for chunk in np.array_split(perm, folds)])
    return FoldPlan(n, plans)
