from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from malshort.features import FeatureVector, LabeledInstance, Schema, feature_names


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    instances: tuple[LabeledInstance, ...]
    schema: Schema

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "schema", Schema(self.schema))
        for inst in self.instances:
            if inst.features.schema is not self.schema:
                raise DatasetError(
                    f"instance {inst.link_id} has schema {inst.features.schema.value}, dataset is {self.schema.value}"
                )

    @classmethod
    def from_instances(cls, instances: Sequence[LabeledInstance], schema=None) -> "Dataset":
        instances = tuple(instances)
        if schema is None:
            if not instances:
                raise DatasetError("cannot infer schema of an empty dataset")
            schema = instances[0].features.schema
        schema = Schema(schema)
        return cls(tuple(
            LabeledInstance(i.link_id, i.features.restrict(schema), i.label) for i in instances
        ), schema)

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return feature_names(self.schema)

    def X(self) -> np.ndarray:
        """Feature matrix with ``nan`` for MISSING."""
        if not self.instances:
            return np.empty((0, len(self.feature_names)))
        return np.array([i.features.as_list() for i in self.instances], dtype=np.float64)

    def y(self) -> np.ndarray:
        """1 for MALICIOUS, 0 for BENIGN."""
        return np.array([int(i.malicious) for i in self.instances], dtype=np.int64)

    def subset(self, indices) -> "Dataset":
        return Dataset(tuple(self.instances[int(i)] for i in indices), self.schema)

    def class_counts(self) -> tuple[int, int]:
        y = self.y()
        return int((y == 0).sum()), int((y == 1).sum())

    def require_trainable(self) -> None:
        if len(self) < 2:
            raise DatasetError("training needs at least 2 instances")
        benign, malicious = self.class_counts()
        if not benign or not malicious:
            raise DatasetError("training needs both classes present")


def impute_medians(X: np.ndarray) -> np.ndarray:
    """Per-column median over non-missing values; 0.0 for all-missing columns."""
    medians = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        col = X[:, j]
        col = col[~np.isnan(col)]
        if col.size:
            medians[j] = float(np.median(col))
    return medians


def apply_imputation(X: np.ndarray, medians) -> np.ndarray:
    X = np.array(X, dtype=np.float64, copy=True)
    rows, cols = np.nonzero(np.isnan(X))
    X[rows, cols] = np.asarray(medians, dtype=np.float64)[cols]
    return X


def vector_row(fv: FeatureVector) -> np.ndarray:
    return np.array([fv.as_list()], dtype=np.float64)
