"""Gaussian naive Bayes over continuous features."""

from __future__ import annotations

import numpy as np

from malshort.learn.dataset import Dataset, apply_imputation, impute_medians
from malshort.learn.model import ModelKind, TrainedModel

VAR_FLOOR = 1e-9


def train_naive_bayes(train: Dataset, seed: int = 0) -> TrainedModel:
    train.require_trainable()
    X = train.X()
    y = train.y()
    medians = impute_medians(X)
    Xi = apply_imputation(X, medians)
    classes = {}
    for c in (0, 1):
        rows = Xi[y == c]
        classes[str(c)] = {
            "prior": rows.shape[0] / Xi.shape[0],
            "mean": rows.mean(axis=0).tolist(),
            "var": np.maximum(rows.var(axis=0), VAR_FLOOR).tolist(),
        }
    return TrainedModel(
        kind=ModelKind.NAIVE_BAYES,
        schema=train.schema,
        params={"var_floor": VAR_FLOOR},
        structure={"classes": classes},
        imputation_medians=tuple(medians),
        training_seed=seed,
    )


def joint_log_likelihood(model: TrainedModel, Xi: np.ndarray) -> np.ndarray:
    """log P(class) + sum_j log N(x_j | mean, var); columns are (benign, malicious)."""
    out = np.empty((Xi.shape[0], 2))
    for c in (0, 1):
        p = model.structure["classes"][str(c)]
        mean = np.asarray(p["mean"])
        var = np.asarray(p["var"])
        ll = -0.5 * (np.log(2.0 * np.pi * var) + (Xi - mean) ** 2 / var)
        out[:, c] = np.log(p["prior"]) + ll.sum(axis=1)
    return out


def posterior(jll: np.ndarray) -> np.ndarray:
    top = jll.max(axis=1, keepdims=True)
    w = np.exp(jll - top)
    return w / w.sum(axis=1, keepdims=True)


def posterior_malicious(model: TrainedModel, Xi: np.ndarray) -> np.ndarray:
    return posterior(joint_log_likelihood(model, Xi))[:, 1]
