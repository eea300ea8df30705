"""Train/test splitting and stratified k-fold cross-validation."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from malshort.learn.dataset import Dataset, DatasetError
from malshort.learn.model import TrainedModel, predict_labels
from malshort.rng import child_rng


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.75
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


def _largest_remainder(sizes: list[int], fraction: float) -> list[int]:
    """Per-group quotas summing to floor(fraction * total), each within 1 of fraction * size."""
    total = int(np.floor(fraction * sum(sizes) + 1e-9))
    exact = [fraction * s for s in sizes]
    quota = [int(np.floor(e + 1e-9)) for e in exact]
    order = sorted(range(len(sizes)), key=lambda i: (-(exact[i] - quota[i]), i))
    for i in order[: max(0, total - sum(quota))]:
        quota[i] += 1
    return quota


def split_indices(y: np.ndarray, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    rng = child_rng(spec.seed, "split")
    n = len(y)
    if not spec.stratified:
        perm = rng.permutation(n)
        k = int(np.floor(spec.train_fraction * n + 1e-9))
        return np.sort(perm[:k]), np.sort(perm[k:])
    groups = [np.flatnonzero(y == c) for c in (0, 1)]
    if any(len(g) == 0 for g in groups):
        raise DatasetError("stratified split needs both classes present")
    quotas = _largest_remainder([len(g) for g in groups], spec.train_fraction)
    train, test = [], []
    for g, q in zip(groups, quotas):
        g = g[rng.permutation(len(g))]
        train.append(g[:q])
        test.append(g[q:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split_dataset(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    train, test = split_indices(data.y(), spec)
    return data.subset(train), data.subset(test)


def stratified_folds(y: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Test-index arrays of ``k`` folds; class counts per fold differ by at most 1.

    Each class is shuffled, then the classes are dealt round-robin in one
    continuous sequence so fold sizes also stay within 1 of each other.
    """
    n = len(y)
    if not 2 <= k <= n:
        raise ValueError(f"k must satisfy 2 <= k <= {n}, got {k}")
    rng = child_rng(seed, "folds")
    order = []
    for c in (0, 1):
        g = np.flatnonzero(y == c)
        order.append(g[rng.permutation(len(g))])
    sequence = np.concatenate(order)
    assignment = np.arange(n) % k
    return [np.sort(sequence[assignment == f]) for f in range(k)]


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    accuracy: float
    weighted_f_measure: float
    metrics: dict = field(default_factory=dict)


@dataclass
class CVResult:
    k: int
    folds: list[FoldResult]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([f.accuracy for f in self.folds]))

    @property
    def mean_f_measure(self) -> float:
        return float(np.mean([f.weighted_f_measure for f in self.folds]))

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "mean_accuracy": self.mean_accuracy,
            "mean_weighted_f_measure": self.mean_f_measure,
            "folds": [
                {"fold": f.fold, "n_train": f.n_train, "n_test": f.n_test,
                 "accuracy": f.accuracy, "weighted_f_measure": f.weighted_f_measure}
                for f in self.folds
            ],
        }


Trainer = Callable[[Dataset, int], TrainedModel]


def cross_validate(data: Dataset, k: int, trainer: Union[Trainer, "object"], seed: int,
                   jobs: int = 1) -> CVResult:
    """Stratified k-fold CV. ``trainer(train_dataset, fold_seed) -> TrainedModel``."""
    from malshort.evaluation import compute_metrics, confusion_matrix_arrays

    y = data.y()
    folds = stratified_folds(y, k, seed)
    X = data.X()

    def run(f):
        test_idx = folds[f]
        mask = np.ones(len(y), dtype=bool)
        mask[test_idx] = False
        train_idx = np.flatnonzero(mask)
        model = trainer(data.subset(train_idx), f)
        pred = predict_labels(model, X[test_idx])
        report = compute_metrics(confusion_matrix_arrays(pred, y[test_idx]))
        return FoldResult(f, len(train_idx), len(test_idx), report.accuracy,
                          report.weighted_f_measure, report.to_dict())

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, range(k)))
    else:
        results = [run(f) for f in range(k)]
    return CVResult(k, results)
