"""Binary decision tree with midpoint thresholds and entropy-based splits."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping, Optional

import numpy as np

from malshort.learn import _kernels
from malshort.learn.dataset import Dataset, apply_imputation, impute_medians
from malshort.learn.model import ModelKind, TrainedModel


@dataclass(frozen=True)
class TreeParams:
    max_depth: Optional[int] = None  # None: unlimited
    min_leaf: int = 2
    use_gain_ratio: bool = False

    def validate(self) -> None:
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be positive")


def grow(Xi: np.ndarray, y: np.ndarray, sample: np.ndarray, params: TreeParams,
         mtry: int, uniforms: np.ndarray) -> dict:
    feature, threshold, left, right, counts = _kernels.build_tree(
        np.ascontiguousarray(Xi, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.int64),
        np.ascontiguousarray(sample, dtype=np.int64),
        -1 if params.max_depth is None else int(params.max_depth),
        int(params.min_leaf),
        int(mtry),
        bool(params.use_gain_ratio),
        np.ascontiguousarray(uniforms, dtype=np.float64),
    )
    return {
        "feature": feature.tolist(),
        "threshold": threshold.tolist(),
        "left": left.tolist(),
        "right": right.tolist(),
        "counts": counts.tolist(),
    }


def train_decision_tree(train: Dataset, params: TreeParams = TreeParams(), seed: int = 0) -> TrainedModel:
    params.validate()
    train.require_trainable()
    X = train.X()
    y = train.y()
    medians = impute_medians(X)
    Xi = apply_imputation(X, medians)
    structure = grow(Xi, y, np.arange(len(y)), params, Xi.shape[1], np.zeros(1))
    return TrainedModel(
        kind=ModelKind.DECISION_TREE,
        schema=train.schema,
        params=asdict(params),
        structure=structure,
        imputation_medians=tuple(medians),
        training_seed=seed,
    )


class _Arrays:
    __slots__ = ("feature", "threshold", "left", "right", "frac")

    def __init__(self, structure: Mapping):
        self.feature = np.asarray(structure["feature"], dtype=np.int64)
        self.threshold = np.asarray(structure["threshold"], dtype=np.float64)
        self.left = np.asarray(structure["left"], dtype=np.int64)
        self.right = np.asarray(structure["right"], dtype=np.int64)
        counts = np.asarray(structure["counts"], dtype=np.float64).reshape(-1, 2)
        self.frac = counts[:, 1] / counts.sum(axis=1)


_cache: dict[int, tuple[Mapping, _Arrays]] = {}


def arrays(structure: Mapping) -> _Arrays:
    hit = _cache.get(id(structure))
    if hit is not None and hit[0] is structure:
        return hit[1]
    arr = _Arrays(structure)
    if len(_cache) > 4096:
        _cache.clear()
    _cache[id(structure)] = (structure, arr)
    return arr


def tree_scores(structure: Mapping, Xi: np.ndarray) -> np.ndarray:
    """Malicious fraction of the leaf each (imputed) row lands in."""
    a = arrays(structure)
    leaves = _kernels.leaf_index(np.ascontiguousarray(Xi, dtype=np.float64), a.feature, a.threshold, a.left, a.right)
    return a.frac[leaves]


def n_leaves(structure: Mapping) -> int:
    return sum(1 for f in structure["feature"] if f == _kernels.LEAF)


def depth(structure: Mapping) -> int:
    left, right = structure["left"], structure["right"]
    best, stack = 0, [(0, 0)]
    while stack:
        node, d = stack.pop()
        best = max(best, d)
        if left[node] != _kernels.LEAF:
            stack.append((left[node], d + 1))
            stack.append((right[node], d + 1))
    return best
