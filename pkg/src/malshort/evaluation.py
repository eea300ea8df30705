"""Confusion matrices, precision/recall/F-measure/accuracy, and info-gain ranking."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from malshort.features import DISPLAY_NAMES
from malshort.labeling import LabelValue
from malshort.learn.dataset import Dataset, apply_imputation, impute_medians

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ConfusionMatrix:
    """MALICIOUS is the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer")
            object.__setattr__(self, name, int(v))
        if self.total < 1:
            raise ValueError("confusion matrix is empty")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def flipped(self) -> "ConfusionMatrix":
        """Same counts with BENIGN treated as the positive class."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)

    def rows(self) -> list[list[int]]:
        """Actual class per row, predicted per column; (malicious, benign) order."""
        return [[self.tp, self.fn], [self.fp, self.tn]]


def _as_bool(values) -> np.ndarray:
    out = []
    for v in values:
        if isinstance(v, LabelValue):
            out.append(v is LabelValue.MALICIOUS)
        elif isinstance(v, str):
            out.append(LabelValue(v) is LabelValue.MALICIOUS)
        else:
            out.append(bool(v))
    return np.array(out, dtype=bool)


def confusion_matrix(predictions: Sequence, truth: Sequence) -> ConfusionMatrix:
    """Labels may be LabelValue, their string values, or 0/1 (1 = malicious)."""
    if len(predictions) != len(truth):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(truth)} labels")
    if not len(truth):
        raise ValueError("need at least one prediction")
    return confusion_matrix_arrays(_as_bool(predictions), _as_bool(truth))


def confusion_matrix_arrays(pred, truth) -> ConfusionMatrix:
    p = np.asarray(pred).astype(bool)
    t = np.asarray(truth).astype(bool)
    return ConfusionMatrix(
        tp=int(np.sum(p & t)), fp=int(np.sum(p & ~t)), tn=int(np.sum(~p & ~t)), fn=int(np.sum(~p & t))
    )


def _ratio(num: int, den: int) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f_measure: float
    support: int
    undefined: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f_measure": self.f_measure,
                "support": self.support, "undefined": list(self.undefined)}


def class_metrics(cm: ConfusionMatrix) -> ClassMetrics:
    undefined = []
    p, u = _ratio(cm.tp, cm.tp + cm.fp)
    if u:
        undefined.append("precision")
    r, u = _ratio(cm.tp, cm.tp + cm.fn)
    if u:
        undefined.append("recall")
    if p + r == 0:
        f = 0.0
        undefined.append("f_measure")
    else:
        f = 2 * p * r / (p + r)
    return ClassMetrics(p, r, f, cm.tp + cm.fn, tuple(undefined))


@dataclass(frozen=True)
class MetricsReport:
    confusion: ConfusionMatrix
    accuracy: float
    malicious: ClassMetrics
    benign: ClassMetrics
    weighted_f_measure: float

    @property
    def undefined(self) -> bool:
        return bool(self.malicious.undefined or self.benign.undefined)

    def to_dict(self) -> dict:
        cm = self.confusion
        return {
            "confusion": {"tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn},
            "accuracy": self.accuracy,
            "malicious": self.malicious.to_dict(),
            "benign": self.benign.to_dict(),
            "weighted_f_measure": self.weighted_f_measure,
        }


def compute_metrics(cm: ConfusionMatrix) -> MetricsReport:
    mal = class_metrics(cm)
    ben = class_metrics(cm.flipped())
    support = mal.support + ben.support
    weighted = (mal.f_measure * mal.support + ben.f_measure * ben.support) / support
    return MetricsReport(cm, (cm.tp + cm.tn) / cm.total, mal, ben, weighted)


# -- information gain ---------------------------------------------------------------


def entropy_bits(y: np.ndarray) -> float:
    n = len(y)
    if n == 0:
        return 0.0
    p = float(np.sum(y)) / n
    if p in (0.0, 1.0):
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def best_threshold_gain(values: np.ndarray, y: np.ndarray) -> tuple[float, float | None]:
    """Largest entropy reduction over binary splits at midpoints of sorted distinct values."""
    order = np.argsort(values, kind="mergesort")
    v = values[order]
    labels = y[order].astype(np.float64)
    n = len(v)
    parent = entropy_bits(labels)
    if n < 2:
        return 0.0, None
    left1 = np.cumsum(labels)[:-1]
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    right1 = labels.sum() - left1
    ok = v[:-1] < v[1:]
    if not ok.any():
        return 0.0, None

    def h(ones, size):
        p = np.divide(ones, size, out=np.zeros_like(ones), where=size > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where((p > 0) & (p < 1), -(p * np.log2(p) + (1 - p) * np.log2(1 - p)), 0.0)
        return t

    child = (nl * h(left1, nl) + nr * h(right1, nr)) / n
    gains = np.where(ok, parent - child, -np.inf)
    i = int(np.argmax(gains))
    return max(0.0, float(gains[i])), float((v[i] + v[i + 1]) / 2)


@dataclass(frozen=True)
class FeatureRanking:
    entries: tuple[tuple[str, float], ...]

    def names(self) -> list[str]:
        return [n for n, _ in self.entries]

    def to_dict(self) -> list[dict]:
        return [{"rank": i + 1, "feature": n, "display_name": DISPLAY_NAMES.get(n, n), "info_gain": g}
                for i, (n, g) in enumerate(self.entries)]


def rank_features(data: Dataset) -> FeatureRanking:
    """Info gain (bits) of each feature's best binary split; MISSING imputed by median first."""
    data.require_trainable()
    X = apply_imputation(data.X(), impute_medians(data.X()))
    y = data.y()
    gains = [(name, best_threshold_gain(X[:, j], y)[0]) for j, name in enumerate(data.feature_names)]
    gains.sort(key=lambda t: (-t[1], t[0]))
    return FeatureRanking(tuple(gains))


# -- rendering -----------------------------------------------------------------------

TABLE_ROWS = (
    ("Accuracy", lambda m: m.accuracy),
    ("Recall (malicious)", lambda m: m.malicious.recall),
    ("Recall (Benign)", lambda m: m.benign.recall),
    ("Precision (malicious)", lambda m: m.malicious.precision),
    ("Precision (Benign)", lambda m: m.benign.precision),
    ("F-measure (malicious)", lambda m: m.malicious.f_measure),
    ("F-measure (benign)", lambda m: m.benign.f_measure),
)
CLASSIFIER_TITLES = {"NAIVE_BAYES": "Naive Bayes", "DECISION_TREE": "Decision Tree", "RANDOM_FOREST": "Random Forest"}


def metrics_from_dict(d: Mapping) -> MetricsReport:
    c = d["confusion"]
    return compute_metrics(ConfusionMatrix(c["tp"], c["fp"], c["tn"], c["fn"]))


def render_table(columns: Mapping[str, MetricsReport], title: str | None = None) -> str:
    """Aligned text table: one metric per row, one classifier per column."""
    headers = ["Evaluation Metric"] + [CLASSIFIER_TITLES.get(k, k) for k in columns]
    body = [[name] + [f"{100 * getter(m):.2f}%" for m in columns.values()] for name, getter in TABLE_ROWS]
    widths = [max(len(r[i]) for r in [headers] + body) for i in range(len(headers))]
    fmt = lambda row: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
    lines = []
    if title:
        lines.append(title)
    lines.append(fmt(headers))
    lines.append("  ".join("-" * w for w in widths))
    lines.extend(fmt(r) for r in body)
    return "\n".join(lines) + "\n"


def render_ranking(ranking: FeatureRanking) -> str:
    lines = ["Rank  Feature                                    Info gain (bits)"]
    for i, (name, gain) in enumerate(ranking.entries, start=1):
        lines.append(f"{i:<5} {DISPLAY_NAMES.get(name, name):<42} {gain:.6f}")
    return "\n".join(lines) + "\n"


def report_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
