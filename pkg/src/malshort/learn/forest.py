"""Random forest: bootstrap-resampled trees with per-node feature sampling."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from malshort.learn.dataset import Dataset, apply_imputation, impute_medians
from malshort.learn.model import ModelKind, TrainedModel
from malshort.learn.tree import TreeParams, grow, tree_scores
from malshort.rng import child_seed


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    features_per_split: Optional[int] = None  # None: floor(log2(F)) + 1
    bootstrap: bool = True
    seed: int = 0
    max_depth: Optional[int] = None
    min_leaf: int = 2
    use_gain_ratio: bool = False

    def validate(self, n_features: int) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.features_per_split is not None and not 1 <= self.features_per_split:
            raise ValueError("features_per_split must be >= 1")
        TreeParams(self.max_depth, self.min_leaf, self.use_gain_ratio).validate()

    def mtry(self, n_features: int) -> int:
        if self.features_per_split is None:
            return int(math.floor(math.log2(n_features))) + 1
        return min(self.features_per_split, n_features)


def _grow_one(i, Xi, y, params: ForestParams, tree_params: TreeParams, mtry: int):
    seed = child_seed(params.seed, "tree", i)
    rng = np.random.default_rng(seed)
    n = len(y)
    sample = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
    uniforms = rng.random((2 * n + 1) * max(mtry, 1))
    return seed, grow(Xi, y, sample, tree_params, mtry, uniforms)


def train_random_forest(train: Dataset, params: ForestParams = ForestParams(), jobs: int = 1) -> TrainedModel:
    """Trees are seeded by (seed, tree index), so ``jobs`` never changes the result."""
    train.require_trainable()
    X = train.X()
    y = train.y()
    F = X.shape[1]
    params.validate(F)
    medians = impute_medians(X)
    Xi = np.ascontiguousarray(apply_imputation(X, medians))
    tree_params = TreeParams(params.max_depth, params.min_leaf, params.use_gain_ratio)
    mtry = params.mtry(F)

    def work(i):
        return _grow_one(i, Xi, y, params, tree_params, mtry)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            grown = list(pool.map(work, range(params.n_trees)))
    else:
        grown = [work(i) for i in range(params.n_trees)]

    return TrainedModel(
        kind=ModelKind.RANDOM_FOREST,
        schema=train.schema,
        params=asdict(params),
        structure={"trees": [t for _, t in grown], "tree_seeds": [s for s, _ in grown]},
        imputation_medians=tuple(medians),
        training_seed=params.seed,
    )


def vote_fraction(model: TrainedModel, Xi: np.ndarray) -> np.ndarray:
    """Share of trees voting MALICIOUS (each tree votes by its leaf majority, ties malicious)."""
    trees = model.structure["trees"]
    votes = np.zeros(Xi.shape[0])
    for t in trees:
        votes += tree_scores(t, Xi) >= 0.5
    return votes / len(trees)
