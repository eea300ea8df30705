"""Trained-model container, prediction, and versioned JSON persistence."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from malshort.features import FeatureVector, Schema, feature_names
from malshort.labeling import LabelValue
from malshort.learn.dataset import apply_imputation

MODEL_SCHEMA_VERSION = 1


class ModelKind(str, enum.Enum):
    NAIVE_BAYES = "NAIVE_BAYES"
    DECISION_TREE = "DECISION_TREE"
    RANDOM_FOREST = "RANDOM_FOREST"


KIND_ALIASES = {"NB": ModelKind.NAIVE_BAYES, "DT": ModelKind.DECISION_TREE, "RF": ModelKind.RANDOM_FOREST}


def model_kind(value) -> ModelKind:
    if isinstance(value, ModelKind):
        return value
    key = str(value).upper()
    return KIND_ALIASES.get(key) or ModelKind(key)


class SchemaMismatch(ValueError):
    """A model was asked to score vectors of a different schema."""


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Prediction:
    label: LabelValue
    score: float


@dataclass(frozen=True)
class TrainedModel:
    kind: ModelKind
    schema: Schema
    params: Mapping[str, Any]
    structure: Mapping[str, Any]
    imputation_medians: tuple[float, ...]
    training_seed: int = 0
    threshold: float = 0.5
    features: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "kind", model_kind(self.kind))
        object.__setattr__(self, "schema", Schema(self.schema))
        object.__setattr__(self, "imputation_medians", tuple(float(m) for m in self.imputation_medians))
        if not self.features:
            object.__setattr__(self, "features", feature_names(self.schema))

    def to_dict(self) -> dict:
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "kind": self.kind.value,
            "schema": self.schema.value,
            "features": list(self.features),
            "params": dict(self.params),
            "imputation_medians": list(self.imputation_medians),
            "training_seed": self.training_seed,
            "threshold": self.threshold,
            "structure": _plain(self.structure),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainedModel":
        version = data.get("schema_version")
        if version != MODEL_SCHEMA_VERSION:
            raise ModelFormatError(f"unsupported model schema_version {version!r}")
        try:
            return cls(
                kind=data["kind"],
                schema=data["schema"],
                params=dict(data["params"]),
                structure=data["structure"],
                imputation_medians=tuple(data["imputation_medians"]),
                training_seed=int(data["training_seed"]),
                threshold=float(data.get("threshold", 0.5)),
                features=tuple(data["features"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"malformed model file: {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _plain(obj):
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def scores(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Malicious score in [0, 1] per row of a raw (possibly nan) matrix."""
    from malshort.learn import forest, naive_bayes, tree

    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != len(model.features):
        raise SchemaMismatch(
            f"model expects {len(model.features)} {model.schema.value} features, got {X.shape[1]}"
        )
    Xi = apply_imputation(X, model.imputation_medians)
    if model.kind is ModelKind.NAIVE_BAYES:
        return naive_bayes.posterior_malicious(model, Xi)
    if model.kind is ModelKind.DECISION_TREE:
        return tree.tree_scores(model.structure, Xi)
    return forest.vote_fraction(model, Xi)


def label_of(score: float, threshold: float = 0.5) -> LabelValue:
    # ties resolve to MALICIOUS
    return LabelValue.MALICIOUS if score >= threshold else LabelValue.BENIGN


def predict(model: TrainedModel, fv: FeatureVector) -> Prediction:
    if fv.schema is not model.schema:
        raise SchemaMismatch(f"model schema {model.schema.value} != vector schema {fv.schema.value}")
    s = float(scores(model, np.array([fv.as_list()]))[0])
    return Prediction(label_of(s, model.threshold), s)


def predict_labels(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """1/0 labels for a raw matrix."""
    return (scores(model, X) >= model.threshold).astype(np.int64)
