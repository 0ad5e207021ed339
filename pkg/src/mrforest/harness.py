"""Cross-validation benchmarking, paired statistics, sweeps, and reports.

All randomness in a run derives from one master seed: the fold plan, the
per-cell training seeds, and the per-cell evaluation streams are produced by
fixed spawn-key domains, so every method sees identical train/test splits
(enabling paired comparisons) and results do not depend on execution order.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .data import Dataset, make_folds
from .errors import ConfigError, IoError, TooFewPairs
from .forest import (
    BaselineConfig,
    Forest,
    MrfConfig,
    predict_batch,
    train_baseline_rf,
    train_mrf,
)

__all__ = [
    "CvReport",
    "SweepReport",
    "TreeDistReport",
    "run_cv",
    "sweep",
    "wilcoxon_signed_rank",
    "tree_accuracy_distribution",
    "average_ranks",
    "emit_report",
]

METHODS = ("mrf", "breiman", "completely_random")

# Spawn-key domains under the harness master seed.
_PLAN_STREAM = 10
_TRAIN_STREAM = 11
_EVAL_STREAM = 12


@dataclass(frozen=True)
class CvReport:
    """Per-fold accuracies of one method on one dataset."""

    dataset: str
    method: str
    folds: int
    repeats: int
    seed: int
    accuracies: tuple[float, ...]  # repeat-major, then fold order
    fold_seconds: tuple[float, ...]
    mean: float
    std: float

    @classmethod
    def build(
        cls,
        dataset: str,
        method: str,
        folds: int,
        repeats: int,
        seed: int,
        accuracies: Sequence[float],
        fold_seconds: Sequence[float],
    ) -> "CvReport":
        acc = np.asarray(accuracies, dtype=np.float64)
        return cls(
            dataset=dataset,
            method=method,
            folds=folds,
            repeats=repeats,
            seed=seed,
            accuracies=tuple(float(a) for a in acc),
            fold_seconds=tuple(float(s) for s in fold_seconds),
            mean=float(acc.mean()),
            std=float(acc.std(ddof=1)) if acc.size > 1 else 0.0,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "cv_report",
            "dataset": self.dataset,
            "method": self.method,
            "folds": self.folds,
            "repeats": self.repeats,
            "seed": self.seed,
            "mean": self.mean,
            "std": self.std,
            "accuracies": list(self.accuracies),
            "fold_seconds": list(self.fold_seconds),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "CvReport":
        return cls(
            dataset=doc["dataset"],
            method=doc["method"],
            folds=doc["folds"],
            repeats=doc["repeats"],
            seed=doc["seed"],
            accuracies=tuple(doc["accuracies"]),
            fold_seconds=tuple(doc["fold_seconds"]),
            mean=doc["mean"],
            std=doc["std"],
        )

    def csv_rows(self) -> tuple[list[str], list[list[Any]]]:
        header = ["repeat", "fold", "accuracy", "seconds"]
        rows = [
            [i // self.folds, i % self.folds, acc, sec]
            for i, (acc, sec) in enumerate(zip(self.accuracies, self.fold_seconds))
        ]
        return header, rows


@dataclass(frozen=True)
class SweepReport:
    """Mean accuracy per (b1, b2) grid cell, all cells on one fold plan."""

    dataset: str
    b1_grid: tuple[float, ...]
    b2_grid: tuple[float, ...]
    folds: int
    repeats: int
    seed: int
    cells: tuple[dict[str, float], ...]  # b1-major, then b2 order

    def mean_at(self, b1: float, b2: float) -> float:
        for cell in self.cells:
            if cell["b1"] == b1 and cell["b2"] == b2:
                return cell["mean_acc"]
        raise KeyError((b1, b2))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "sweep_report",
            "dataset": self.dataset,
            "b1_grid": list(self.b1_grid),
            "b2_grid": list(self.b2_grid),
            "folds": self.folds,
            "repeats": self.repeats,
            "seed": self.seed,
            "cells": [dict(c) for c in self.cells],
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "SweepReport":
        return cls(
            dataset=doc["dataset"],
            b1_grid=tuple(doc["b1_grid"]),
            b2_grid=tuple(doc["b2_grid"]),
            folds=doc["folds"],
            repeats=doc["repeats"],
            seed=doc["seed"],
            cells=tuple(doc["cells"]),
        )

    def csv_rows(self) -> tuple[list[str], list[list[Any]]]:
        header = ["B1", "B2", "mean_acc", "std"]
        rows = [[c["b1"], c["b2"], c["mean_acc"], c["std"]] for c in self.cells]
        return header, rows


@dataclass(frozen=True)
class TreeDistReport:
    """Per-tree accuracies of one forest on a held-out row set."""

    dataset: str
    method: str
    accuracies: tuple[float, ...]
    forest_accuracy: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "tree_dist_report",
            "dataset": self.dataset,
            "method": self.method,
            "forest_accuracy": self.forest_accuracy,
            "accuracies": list(self.accuracies),
        }

    def csv_rows(self) -> tuple[list[str], list[list[Any]]]:
        return ["tree", "accuracy"], [[i, a] for i, a in enumerate(self.accuracies)]


def _cell_seed(seed: int, repeat: int, fold: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(_TRAIN_STREAM, repeat, fold))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _eval_rng(seed: int, repeat: int, fold: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(_EVAL_STREAM, repeat, fold))
    )


def _train_for_method(
    dataset: Dataset, method: str, config: MrfConfig | BaselineConfig
) -> Forest:
    if method == "mrf":
        return train_mrf(dataset, config)
    if method == "completely_random":
        return train_mrf(dataset, replace(config, b1=0.0, b2=0.0))
    if method == "breiman":
        if isinstance(config, MrfConfig):
            config = BaselineConfig(
                t=config.t, k=config.k, criterion=config.criterion, seed=config.seed
            )
        return train_baseline_rf(dataset, config)
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")


def _run_cell(args: tuple) -> tuple[int, int, float, float]:
    dataset, method, config, repeat, fold, train_idx, test_idx, seed = args
    start = time.perf_counter()
    cell_config = replace(config, seed=_cell_seed(seed, repeat, fold))
    forest = _train_for_method(dataset.subset(train_idx), method, cell_config)
    classes, _ = predict_batch(
        forest, dataset.features[test_idx], _eval_rng(seed, repeat, fold)
    )
    accuracy = float(np.mean(classes == dataset.labels[test_idx]))
    return repeat, fold, accuracy, time.perf_counter() - start


def run_cv(
    dataset: Dataset,
    method: str,
    config: MrfConfig | BaselineConfig,
    folds: int,
    repeats: int,
    seed: int,
    name: str = "dataset",
    n_jobs: int = 1,
) -> CvReport:
    """Repeated k-fold cross validation of one method.

    The fold plan depends only on (n, folds, repeats, seed), so different
    methods at the same seed see byte-identical splits. ``config.seed`` is
    ignored: each cell trains with a seed derived from (seed, repeat, fold).
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    plan_rng = np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(_PLAN_STREAM,))
    )
    plan = make_folds(dataset.n, folds, repeats, plan_rng)
    jobs = [
        (dataset, method, config, r, f, plan.train(r, f), plan.test(r, f), seed)
        for r in range(repeats)
        for f in range(folds)
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_cell, jobs, chunksize=1))
    else:
        results = [_run_cell(job) for job in jobs]
    ordered = {(r, f): (acc, sec) for r, f, acc, sec in results}
    accs = [ordered[(r, f)][0] for r in range(repeats) for f in range(folds)]
    secs = [ordered[(r, f)][1] for r in range(repeats) for f in range(folds)]
    return CvReport.build(name, method, folds, repeats, seed, accs, secs)


def sweep(
    dataset: Dataset,
    b1_grid: Sequence[float],
    b2_grid: Sequence[float],
    config: MrfConfig,
    folds: int,
    repeats: int,
    seed: int,
    name: str = "dataset",
    n_jobs: int = 1,
) -> SweepReport:
    """Grid of run_cv results over (b1, b2), all on the seed's shared fold plan."""
    if not b1_grid or not b2_grid:
        raise ConfigError("sweep grids must be nonempty")
    cells = []
    for b1 in b1_grid:
        for b2 in b2_grid:
            report = run_cv(
                dataset,
                "mrf",
                replace(config, b1=float(b1), b2=float(b2)),
                folds,
                repeats,
                seed,
                name=name,
                n_jobs=n_jobs,
            )
            cells.append(
                {
                    "b1": float(b1),
                    "b2": float(b2),
                    "mean_acc": report.mean,
                    "std": report.std,
                }
            )
    return SweepReport(
        dataset=name,
        b1_grid=tuple(float(b) for b in b1_grid),
        b2_grid=tuple(float(b) for b in b2_grid),
        folds=folds,
        repeats=repeats,
        seed=seed,
        cells=tuple(cells),
    )


def _rank_average(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mean rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sided signed-rank p-value for paired samples.

    Zero differences are dropped; at least six nonzero pairs are required.
    Up to 15 pairs the exact permutation distribution is enumerated (ties get
    average ranks); beyond that a normal approximation with tie and
    continuity corrections is used.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise TooFewPairs("paired samples must have equal length")
    diffs = a - b
    diffs = diffs[diffs != 0]
    n = diffs.size
    if n < 6:
        raise TooFewPairs(f"need >= 6 nonzero paired differences, got {n}")
    ranks = _rank_average(np.abs(diffs))
    w_plus = float(ranks[diffs > 0].sum())

    if n <= 15:
        # Subset-sum distribution of W+ over all 2^n sign patterns; average
        # ranks are half-integers, so doubling makes everything integral.
        ranks2 = np.rint(2.0 * ranks).astype(np.int64)
        dist = np.zeros(int(ranks2.sum()) + 1, dtype=np.float64)
        dist[0] = 1.0
        for r in ranks2:
            shifted = np.zeros_like(dist)
            shifted[r:] = dist[: dist.size - r]
            dist += shifted
        total = 2.0**n
        w2 = int(np.rint(2.0 * w_plus))
        p_low = dist[: w2 + 1].sum() / total
        p_high = dist[w2:].sum() / total
        return min(1.0, 2.0 * min(p_low, p_high))

    mean = n * (n + 1) / 4.0
    variance = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    variance -= float(((tie_counts**3 - tie_counts) / 48.0).sum())
    delta = w_plus - mean
    if delta == 0:
        return 1.0
    z = (delta - 0.5 * math.copysign(1.0, delta)) / math.sqrt(variance)
    return min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))


def tree_accuracy_distribution(
    forest: Forest,
    features: np.ndarray,
    labels: np.ndarray,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Accuracy of each individual tree's votes on the given rows."""
    labels = np.asarray(labels, dtype=np.int64)
    _, votes = predict_batch(forest, features, rng)
    return (votes == labels[None, :]).mean(axis=1)


def average_ranks(scores: dict[str, dict[str, float]]) -> dict[str, float]:
    """Average rank of each method across datasets (rank 1 = highest score).

    ``scores`` maps method -> dataset -> accuracy; every method must cover
    the same datasets. External baseline numbers can be merged in before the
    call to rank against published results.
    """
    methods = sorted(scores)
    datasets = sorted(next(iter(scores.values())))
    for method in methods:
        if sorted(scores[method]) != datasets:
            raise ConfigError("all methods must report the same datasets")
    totals = {m: 0.0 for m in methods}
    for ds in datasets:
        accs = np.asarray([scores[m][ds] for m in methods])
        ranks = _rank_average(-accs)
        for m, r in zip(methods, ranks):
            totals[m] += float(r)
    return {m: totals[m] / len(datasets) for m in methods}


def _format_cell(value: Any) -> str:
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def emit_report(
    report: CvReport | SweepReport | TreeDistReport,
    format: str = "json",
    path: str | Path | None = None,
) -> str:
    """Serialize a report; JSON keeps full float precision for exact re-parsing,
    CSV prints floats with 6 significant digits for plotting.

    Returns the rendered text; ``path`` additionally writes it (IoError on
    failure).
    """
    if format == "json":
        text = json.dumps(report.to_dict(), indent=2) + "\n"
    elif format == "csv":
        header, rows = report.csv_rows()
        lines = [",".join(header)]
        lines += [",".join(_format_cell(v) for v in row) for row in rows]
        text = "\n".join(lines) + "\n"
    else:
        raise ConfigError(f"unknown report format {format!r}")
    if path is not None:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write report to {path}: {exc}") from exc
    return text
