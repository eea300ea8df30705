"""Encoder-account analytics: suspicion factor, text similarity, timelines, overlap."""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Optional, Sequence

import numpy as np

from malshort.core.domains import registrable_domain
from malshort.core.model import EncoderProfile, State

HIGHLY_SUSPICIOUS_MIN_HISTORY = 100
LOW_VARIANCE_THRESHOLD = 0.00012
MIN_POSTS = 3

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)


class ProfileError(ValueError):
    pass


# -- suspicion -------------------------------------------------------------------------


def suspicion_fraction(profile: EncoderProfile) -> Fraction:
    """Exact share of history entries that hit the warning page."""
    if not profile.history:
        raise ProfileError(f"profile {profile.account_id} has an empty link history")
    warned = sum(h.state is State.WARNING for h in profile.history)
    return Fraction(warned, len(profile.history))


def suspicion_factor(profile: EncoderProfile) -> float:
    return float(suspicion_fraction(profile))


@dataclass(frozen=True)
class SuspicionReport:
    account_id: str
    suspicion_factor: float
    history_size: int
    highly_suspicious: bool

    def to_dict(self) -> dict:
        return {"account_id": self.account_id, "suspicion_factor": self.suspicion_factor,
                "history_size": self.history_size, "highly_suspicious": self.highly_suspicious}


def suspicion_report(profile: EncoderProfile) -> SuspicionReport:
    frac = suspicion_fraction(profile)
    size = len(profile.history)
    return SuspicionReport(profile.account_id, float(frac), size,
                           size >= HIGHLY_SUSPICIOUS_MIN_HISTORY and frac == 1)


# -- text similarity ---------------------------------------------------------------------


def tokenize(text: str) -> frozenset:
    """Strip URLs, lowercase, split on whitespace."""
    return frozenset(t for t in _URL_RE.sub(" ", text).lower().split() if t)


def jaccard(a: Iterable, b: Iterable) -> float:
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


@dataclass(frozen=True)
class VarianceResult:
    variance: float
    flagged: bool
    n_pairs: int


def similarity_variance(posts: Sequence[Iterable], threshold: float = LOW_VARIANCE_THRESHOLD) -> VarianceResult:
    """Population variance of all pairwise Jaccard values between posts."""
    sets = [set(p) for p in posts]
    if len(sets) < MIN_POSTS:
        raise ProfileError(f"need at least {MIN_POSTS} posts, got {len(sets)}")
    values = np.array([jaccard(a, b) for a, b in combinations(sets, 2)])
    var = float(np.var(values))
    return VarianceResult(var, var < threshold, len(values))


# -- activity timeline ---------------------------------------------------------------------


def _month_index(ts: datetime) -> int:
    ts = ts.astimezone(timezone.utc)
    return ts.year * 12 + ts.month - 1


def _month_label(idx: int) -> str:
    return f"{idx // 12:04d}-{idx % 12 + 1:02d}"


@dataclass(frozen=True)
class MonthBucket:
    month: str
    links_created: int
    clicks_received: int


@dataclass(frozen=True)
class Timeline:
    buckets: tuple[MonthBucket, ...]
    month_lag: int

    def to_csv(self) -> str:
        rows = ["month,links,clicks"] + [f"{b.month},{b.links_created},{b.clicks_received}" for b in self.buckets]
        return "\n".join(rows) + "\n"


def activity_timeline(profile: EncoderProfile) -> Timeline:
    """Links and clicks per calendar month (UTC), zero-filled between first and last link.

    Clicks are attributed to the month their link was created in.
    """
    if not profile.history:
        raise ProfileError(f"profile {profile.account_id} has an empty link history")
    months = [_month_index(h.created_at) for h in profile.history]
    first, last = min(months), max(months)
    links = np.zeros(last - first + 1, dtype=np.int64)
    clicks = np.zeros(last - first + 1, dtype=np.int64)
    for m, h in zip(months, profile.history):
        links[m - first] += 1
        clicks[m - first] += h.click_count
    buckets = tuple(MonthBucket(_month_label(first + i), int(links[i]), int(clicks[i])) for i in range(len(links)))
    return Timeline(buckets, last - first)


# -- posting pattern ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PostingPattern:
    points: tuple[tuple[int, int], ...]  # (hour, minute) in UTC
    automation_score: float


def posting_pattern(timestamps: Sequence[datetime]) -> PostingPattern:
    """Hour/minute scatter plus a coverage-based automation score in [0, 1].

    The score averages ``1 - distinct_minutes/60`` and ``1 - distinct_hours/24``:
    schedulers that always post on the same minute or hours score high.
    """
    if not timestamps:
        raise ProfileError("need at least one timestamp")
    pts = tuple((t.astimezone(timezone.utc).hour, t.astimezone(timezone.utc).minute) for t in timestamps)
    minutes = len({m for _, m in pts})
    hours = len({h for h, _ in pts})
    score = ((1 - minutes / 60) + (1 - hours / 24)) / 2
    return PostingPattern(pts, score)


# -- cross-account overlap -----------------------------------------------------------------------


@dataclass(frozen=True)
class PairOverlap:
    a: str
    b: str
    url_overlap: float
    domain_overlap: float
    text_similarity: float

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "url_overlap": self.url_overlap,
                "domain_overlap": self.domain_overlap, "text_similarity": self.text_similarity}


def _url_set(profile: EncoderProfile) -> set[str]:
    return {u for p in profile.posts or () for u in p.urls}


def _domain_set(urls: Iterable[str]) -> set[str]:
    out = set()
    for u in urls:
        try:
            out.add(registrable_domain(u))
        except ValueError:
            continue
    return out


@dataclass(frozen=True)
class _Footprint:
    urls: frozenset
    domains: frozenset
    texts: tuple

    @classmethod
    def of(cls, profile: EncoderProfile) -> "_Footprint":
        urls = _url_set(profile)
        return cls(frozenset(urls), frozenset(_domain_set(urls)), tuple(p.text_tokens for p in profile.posts or ()))


def _mean_text_similarity(xs, ys) -> float:
    if not xs or not ys:
        return 0.0
    return float(np.mean([jaccard(x, y) for x in xs for y in ys]))


def pair_overlap(a: EncoderProfile, b: EncoderProfile) -> PairOverlap:
    fa, fb = _Footprint.of(a), _Footprint.of(b)
    return PairOverlap(a.account_id, b.account_id, jaccard(fa.urls, fb.urls),
                       jaccard(fa.domains, fb.domains), _mean_text_similarity(fa.texts, fb.texts))


@dataclass(frozen=True)
class OverlapMatrix:
    accounts: tuple[str, ...]
    url_overlap: np.ndarray
    domain_overlap: np.ndarray
    text_similarity: np.ndarray

    def pair(self, a: str, b: str) -> tuple[float, float, float]:
        i, j = self.accounts.index(a), self.accounts.index(b)
        return float(self.url_overlap[i, j]), float(self.domain_overlap[i, j]), float(self.text_similarity[i, j])

    def to_dict(self) -> dict:
        return {
            "accounts": list(self.accounts),
            "url_overlap": self.url_overlap.tolist(),
            "domain_overlap": self.domain_overlap.tolist(),
            "text_similarity": self.text_similarity.tolist(),
        }


def cross_account_overlap(profiles: Sequence[EncoderProfile]) -> OverlapMatrix:
    """Symmetric pairwise overlap; the diagonal compares a profile with itself."""
    profiles = [p for p in profiles if p.posts]
    if len(profiles) < 2:
        raise ProfileError("need at least two profiles with posts")
    n = len(profiles)
    url = np.zeros((n, n))
    dom = np.zeros((n, n))
    txt = np.zeros((n, n))
    prints = [_Footprint.of(p) for p in profiles]
    for i in range(n):
        for j in range(i, n):
            a, b = prints[i], prints[j]
            url[i, j] = url[j, i] = jaccard(a.urls, b.urls)
            dom[i, j] = dom[j, i] = jaccard(a.domains, b.domains)
            txt[i, j] = txt[j, i] = _mean_text_similarity(a.texts, b.texts)
    return OverlapMatrix(tuple(p.account_id for p in profiles), url, dom, txt)


def suspicious_accounts(profiles: Iterable[EncoderProfile], min_factor: float = 0.0) -> list[SuspicionReport]:
    """Suspicion reports for every profile with history, sorted by account id."""
    out = [suspicion_report(p) for p in profiles if p.history]
    return sorted((r for r in out if r.suspicion_factor >= min_factor), key=lambda r: r.account_id)


def post_timestamps(profile: EncoderProfile) -> list[datetime]:
    return [p.at for p in profile.posts or () if p.at is not None]


def low_variance_accounts(profiles: Iterable[EncoderProfile],
                          threshold: float = LOW_VARIANCE_THRESHOLD) -> list[tuple[str, Optional[VarianceResult]]]:
    """Per profile: variance result, or ``None`` when it has fewer than three posts."""
    out = []
    for p in profiles:
        posts = [post.text_tokens for post in p.posts or ()]
        out.append((p.account_id, similarity_variance(posts, threshold) if len(posts) >= MIN_POSTS else None))
    return out
