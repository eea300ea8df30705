"""Classifiers, splitting, and cross-validation."""

from __future__ import annotations

from dataclasses import fields
from typing import Any, Mapping, Optional

from malshort.learn.dataset import Dataset, DatasetError, apply_imputation, impute_medians
from malshort.learn.forest import ForestParams, train_random_forest
from malshort.learn.model import (
    ModelFormatError,
    ModelKind,
    Prediction,
    SchemaMismatch,
    TrainedModel,
    model_kind,
    predict,
    predict_labels,
    scores,
)
from malshort.learn.naive_bayes import train_naive_bayes
from malshort.learn.tree import TreeParams, train_decision_tree
from malshort.learn.validation import CVResult, SplitSpec, cross_validate, split_dataset, stratified_folds
from malshort.rng import child_seed


def _pick(cls, params: Mapping[str, Any]):
    names = {f.name for f in fields(cls)}
    unknown = set(params) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} options: {sorted(unknown)}")
    return cls(**params)


class TrainerConfig:
    """Classifier kind plus hyper-parameters; callable as ``(train, fold) -> model``."""

    def __init__(self, kind, params: Optional[Mapping[str, Any]] = None, seed: int = 0, jobs: int = 1):
        self.kind = model_kind(kind)
        self.params = dict(params or {})
        self.seed = seed
        self.jobs = jobs
        if self.kind is ModelKind.DECISION_TREE:
            _pick(TreeParams, self.params).validate()
        elif self.kind is ModelKind.RANDOM_FOREST:
            _pick(ForestParams, {k: v for k, v in self.params.items() if k != "seed"})
        elif self.params:
            raise ValueError("naive Bayes takes no parameters")

    def train(self, data: Dataset, seed: Optional[int] = None) -> TrainedModel:
        seed = self.seed if seed is None else seed
        if self.kind is ModelKind.NAIVE_BAYES:
            return train_naive_bayes(data, seed)
        if self.kind is ModelKind.DECISION_TREE:
            return train_decision_tree(data, _pick(TreeParams, self.params), seed)
        params = {k: v for k, v in self.params.items() if k != "seed"}
        return train_random_forest(data, _pick(ForestParams, {**params, "seed": seed}), self.jobs)

    def __call__(self, data: Dataset, fold: int) -> TrainedModel:
        return self.train(data, child_seed(self.seed, "fold", fold))


__all__ = [
    "CVResult", "Dataset", "DatasetError", "ForestParams", "ModelFormatError", "ModelKind",
    "Prediction", "SchemaMismatch", "SplitSpec", "TrainedModel", "TrainerConfig", "TreeParams",
    "apply_imputation", "cross_validate", "impute_medians", "model_kind", "predict",
    "predict_labels", "scores", "split_dataset", "stratified_folds", "train_decision_tree",
    "train_naive_bayes", "train_random_forest",
]
