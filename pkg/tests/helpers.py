"""Builders shared by the test modules."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np

from malshort.core.model import ClickEvent, EncoderKind, EncoderRef, ShortLinkRecord
from malshort.features import FeatureVector, LabeledInstance, Schema
from malshort.labeling import Label, LabelValue, NO_SOURCE
from malshort.learn import Dataset

# Columns of a FULL vector that accept any real value.
FREE_COLUMNS = (0, 1, 5)

T0 = datetime(2013, 6, 1, 12, 0, tzinfo=timezone.utc)


def label(malicious: bool) -> Label:
    if malicious:
        return Label(LabelValue.MALICIOUS, ("test",))
    return Label(LabelValue.BENIGN, (NO_SOURCE,))


def dataset_from_arrays(X, y) -> Dataset:
    """FULL dataset whose free columns (domain_age, creation_gap, click_lag) hold ``X``.

    Up to three columns are supported; the remaining features are constant,
    so they never win a split and carry zero information gain.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] > len(FREE_COLUMNS):
        raise ValueError("need a 2-d matrix with at most three columns")
    rows = []
    for i, (row, target) in enumerate(zip(X, y)):
        free = [None if np.isnan(v) else float(v) for v in row] + [0.0] * (3 - len(row))
        fv = FeatureVector(Schema.FULL, free[0], free[1], 12, 1, 0.0, free[2], 0.0)
        rows.append(LabeledInstance(f"r{i}", fv, label(bool(target))))
    return Dataset(tuple(rows), Schema.FULL)


def full_matrix(X) -> np.ndarray:
    """The 7-column matrix ``dataset_from_arrays`` produces for ``X``."""
    X = np.asarray(X, dtype=np.float64)
    out = np.zeros((X.shape[0], 7))
    out[:, 2] = 12
    out[:, 3] = 1
    for j in range(X.shape[1]):
        out[:, FREE_COLUMNS[j]] = X[:, j]
    return out


def random_dataset(rng: np.random.Generator, n: int, n_features: int, n_values: int = 6) -> tuple:
    """Small integer-valued dataset with both classes present."""
    X = rng.integers(0, n_values, size=(n, n_features)).astype(np.float64)
    y = rng.integers(0, 2, size=n)
    y[0], y[1] = 0, 1
    return X, y


def make_link(short_hash="abc123", long_url="http://www.example.com/page", created_at=T0,
              encoders=None, clicks=(), referrers=(), whois=None, warning_count=0) -> ShortLinkRecord:
    from malshort.core.domains import registrable_domain

    if encoders is None:
        encoders = (EncoderRef("alice", EncoderKind.REGULAR),)
    return ShortLinkRecord(
        short_hash=short_hash,
        global_hash="g" + short_hash,
        long_url=long_url,
        domain=registrable_domain(long_url),
        created_at=created_at,
        encoders=tuple(encoders),
        clicks=tuple(clicks),
        referrers=tuple(referrers),
        whois=whois,
        warning_count=warning_count,
    )


def clicks_after(created_at, *offsets_days):
    return tuple(ClickEvent(created_at + timedelta(days=d), 1) for d in offsets_days)

