"""Ground-truth labels from blacklist providers and a link-state probe.

A link is malicious when any provider lists its expanded URL (or its
registrable domain, for domain-level providers) or when resolving the short
link lands on the shortener's warning interstitial. Failed lookups are
recorded but never count as a hit.
"""

from __future__ import annotations

import enum
import json
import logging
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Protocol, Sequence
from urllib.parse import urlsplit, urlunsplit

from malshort.core.domains import registrable_domain
from malshort.core.io import dumps, format_ts, parse_ts
from malshort.core.model import Corpus, ShortLinkRecord, State
from malshort.core.synthetic import SHORT_BASE, domain_probe_url

log = logging.getLogger(__name__)

CATEGORIES = ("phishing", "malware", "spam", "unknown")
WARNING_SOURCE = "warning_page"
NO_SOURCE = "none"
DEFAULT_WARNING_PATTERN = r"^https?://(?:www\.)?(?:bit\.ly|bitly\.com|j\.mp)/(?:a/)?warning(?:[/?#]|$)"

# Paper order of the four services; unknown providers sort after these.
PROVIDER_ORDER = ("safebrowsing", "surbl", "phishtank", "virustotal")
DEFAULT_LEVELS = {"surbl": "domain"}
DEFAULT_CATEGORIES = {"safebrowsing": "malware", "surbl": "spam", "phishtank": "phishing"}


class LabelValue(str, enum.Enum):
    MALICIOUS = "MALICIOUS"
    BENIGN = "BENIGN"


@dataclass(frozen=True)
class BlacklistVerdict:
    provider: str
    hit: bool
    category: Optional[str] = None
    checked_at: Optional[datetime] = None
    evidence: str = "url"  # "url" or "domain": what the provider was asked about

    def __post_init__(self):
        if self.category is not None and self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        # "unknown" without a hit marks a failed lookup
        if self.category is not None and not self.hit and self.category != "unknown":
            raise ValueError("category is only set on hits (or 'unknown' for failed lookups)")
        if self.evidence not in ("url", "domain"):
            raise ValueError(f"evidence must be 'url' or 'domain', got {self.evidence!r}")

    @property
    def failed(self) -> bool:
        return not self.hit and self.category == "unknown"


@dataclass(frozen=True)
class LinkState:
    state: State
    observed_at: Optional[datetime] = None

    def __post_init__(self):
        object.__setattr__(self, "state", State(self.state))


@dataclass(frozen=True)
class Label:
    value: LabelValue
    sources: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "value", LabelValue(self.value))
        object.__setattr__(self, "sources", tuple(self.sources))
        if not self.sources:
            raise ValueError("label sources must be non-empty")
        fired = [s for s in self.sources if s != NO_SOURCE]
        if (self.value is LabelValue.MALICIOUS) != bool(fired):
            raise ValueError(f"label {self.value.value} inconsistent with sources {self.sources}")

    @property
    def malicious(self) -> bool:
        return self.value is LabelValue.MALICIOUS


# -- providers -------------------------------------------------------------------


class Provider(Protocol):
    name: str
    level: str  # "url" or "domain"
    rate_limit: Optional[float]  # requests per second
    timeout: Optional[float]

    def check(self, target: str) -> tuple[bool, Optional[str]]:
        ...


class RateLimiter:
    """Spaces calls at least ``1 / rate`` seconds apart; thread-safe."""

    def __init__(self, rate: Optional[float]):
        self.interval = 1.0 / rate if rate else 0.0
        self._next = 0.0
        self._lock = threading.Lock()

    def wait(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next - now
            self._next = max(now, self._next) + self.interval
        if delay > 0:
            time.sleep(delay)


def normalize_url(url: str) -> str:
    parts = urlsplit(url.strip())
    return urlunsplit((parts.scheme.lower(), parts.netloc.lower(), parts.path, parts.query, parts.fragment))


class FixtureProvider:
    """Deny-list replay: one URL or domain per line, ``#`` comments.

    A line may carry a category after whitespace (``evil.ru phishing``).
    """

    def __init__(self, name: str, entries: Iterable[str], level: str = "url",
                 category: Optional[str] = None):
        self.name = name
        self.level = level
        self.rate_limit = None
        self.timeout = None
        self.default_category = category or DEFAULT_CATEGORIES.get(name, "unknown")
        self.entries: dict[str, str] = {}
        for raw in entries:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            target, *rest = line.split()
            cat = rest[0] if rest and rest[0] in CATEGORIES else self.default_category
            key = target.lower() if level == "domain" else normalize_url(target)
            self.entries[key] = cat

    @classmethod
    def from_file(cls, path, name: Optional[str] = None, level: Optional[str] = None) -> "FixtureProvider":
        path = Path(path)
        name = name or path.stem.removeprefix("blacklist_")
        with open(path, encoding="utf-8") as fh:
            return cls(name, fh, level or DEFAULT_LEVELS.get(name, "url"))

    def check(self, target: str) -> tuple[bool, Optional[str]]:
        key = target.lower() if self.level == "domain" else normalize_url(target)
        cat = self.entries.get(key)
        return (cat is not None), cat


def load_fixture_providers(directory) -> list[FixtureProvider]:
    files = sorted(Path(directory).glob("blacklist_*.txt"))
    providers = [FixtureProvider.from_file(f) for f in files]
    rank = {name: i for i, name in enumerate(PROVIDER_ORDER)}
    return sorted(providers, key=lambda p: (rank.get(p.name, len(rank)), p.name))


def load_whitelist(path) -> frozenset:
    path = Path(path)
    if not path.exists():
        return frozenset()
    out = set()
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip().lower()
        if line:
            out.add(line)
    return frozenset(out)


def _now() -> datetime:
    return datetime.now(timezone.utc)


_timeout_pool = ThreadPoolExecutor(max_workers=4, thread_name_prefix="provider")
_limiters: dict[int, RateLimiter] = {}
_limiters_lock = threading.Lock()


def _limiter_for(provider) -> RateLimiter:
    with _limiters_lock:
        lim = _limiters.get(id(provider))
        if lim is None:
            lim = _limiters[id(provider)] = RateLimiter(getattr(provider, "rate_limit", None))
        return lim


def _check_one(provider, url: str, checked_at: datetime) -> BlacklistVerdict:
    level = getattr(provider, "level", "url")
    try:
        target = registrable_domain(url) if level == "domain" else url
        _limiter_for(provider).wait()
        timeout = getattr(provider, "timeout", None)
        if timeout:
            hit, category = _timeout_pool.submit(provider.check, target).result(timeout=timeout)
        else:
            hit, category = provider.check(target)
    except Exception as exc:  # noqa: BLE001 - any failure, timeouts included, is a non-hit
        log.warning("lookup failed: provider=%s url=%s error=%s", provider.name, url, exc)
        return BlacklistVerdict(provider.name, False, "unknown", checked_at, level)
    hit = bool(hit)
    if hit:
        category = category if category in CATEGORIES else "unknown"
    else:
        category = None
    return BlacklistVerdict(provider.name, hit, category, checked_at, level)


def query_blacklists(url: str, providers: Sequence, checked_at: Optional[datetime] = None) -> list[BlacklistVerdict]:
    """One verdict per provider, in provider order."""
    checked_at = checked_at or _now()
    return [_check_one(p, url, checked_at) for p in providers]


def query_many(urls: Sequence[str], providers: Sequence, checked_at: Optional[datetime] = None,
               max_in_flight: int = 1) -> list[list[BlacklistVerdict]]:
    """``query_blacklists`` over many URLs; output order follows ``urls``."""
    checked_at = checked_at or _now()
    if max_in_flight <= 1:
        return [query_blacklists(u, providers, checked_at) for u in urls]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(lambda u: query_blacklists(u, providers, checked_at), urls))


# -- probing ---------------------------------------------------------------------


class ProbeError(Exception):
    """Transport-level failure: DNS, refused connection, timeout."""


@dataclass(frozen=True)
class ProbeResponse:
    status: int  # status of the first hop
    final_url: str
    chain: tuple[str, ...] = ()


class FixtureProbe:
    """Replays ``probes.jsonl``; unknown URLs behave like unreachable hosts."""

    def __init__(self, responses: Mapping[str, ProbeResponse]):
        self.responses = dict(responses)

    @classmethod
    def from_file(cls, path) -> "FixtureProbe":
        responses = {}
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                if not raw.strip():
                    continue
                row = json.loads(raw)
                responses[row["url"]] = ProbeResponse(
                    int(row["status"]), row.get("final_url", row["url"]), tuple(row.get("chain", ()))
                )
        return cls(responses)

    def resolve(self, url: str) -> ProbeResponse:
        try:
            return self.responses[url]
        except KeyError:
            raise ProbeError(f"connection failed: {url}") from None


class HttpProbe:
    """Live GET probe following redirects. Only used with ``--live``."""

    def __init__(self, timeout: float = 10.0):
        self.timeout = timeout

    def resolve(self, url: str) -> ProbeResponse:
        import requests

        try:
            resp = requests.get(url, allow_redirects=True, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ProbeError(str(exc)) from exc
        hops = list(resp.history) + [resp]
        return ProbeResponse(hops[0].status_code, resp.url, tuple(h.url for h in hops))


def probe_link_state(short_url: str, probe, warning_pattern: str = DEFAULT_WARNING_PATTERN,
                     observed_at: Optional[datetime] = None) -> LinkState:
    observed_at = observed_at or _now()
    try:
        resp = probe.resolve(short_url)
    except Exception as exc:  # noqa: BLE001 - every transport error means DEAD
        log.debug("probe failed for %s: %s", short_url, exc)
        return LinkState(State.DEAD, observed_at)
    if resp.status >= 400:
        return LinkState(State.DEAD, observed_at)
    if re.search(warning_pattern, resp.final_url):
        return LinkState(State.WARNING, observed_at)
    return LinkState(State.ACTIVE, observed_at)


# -- labels ----------------------------------------------------------------------


def label_instance(link: ShortLinkRecord, verdicts: Sequence[BlacklistVerdict], state: LinkState,
                   whitelist: frozenset = frozenset()) -> Label:
    """Any-hit rule. Whitelisted domains ignore domain-level evidence."""
    suppress_domain = link.domain in whitelist
    sources: list[str] = []
    for v in verdicts:
        if not v.hit or (suppress_domain and v.evidence == "domain"):
            continue
        if v.provider not in sources:
            sources.append(v.provider)
    if state.state is State.WARNING:
        sources.append(WARNING_SOURCE)
    if sources:
        return Label(LabelValue.MALICIOUS, tuple(sources))
    return Label(LabelValue.BENIGN, (NO_SOURCE,))


@dataclass(frozen=True)
class LabelRecord:
    short_hash: str
    label: Label
    state: LinkState
    verdicts: tuple[BlacklistVerdict, ...] = ()


def label_corpus(corpus: Corpus, providers: Sequence, probe, whitelist: frozenset = frozenset(),
                 warning_pattern: str = DEFAULT_WARNING_PATTERN, short_base: str = SHORT_BASE,
                 checked_at: Optional[datetime] = None, max_in_flight: int = 1) -> list[LabelRecord]:
    checked_at = checked_at or _now()
    all_verdicts = query_many([l.long_url for l in corpus.links], providers, checked_at, max_in_flight)
    out = []
    for link, verdicts in zip(corpus.links, all_verdicts):
        state = probe_link_state(short_base + link.short_hash, probe, warning_pattern, checked_at)
        out.append(LabelRecord(link.short_hash, label_instance(link, verdicts, state, whitelist),
                               state, tuple(verdicts)))
    return out


def save_labels(records: Iterable[LabelRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dumps({
                "short_hash": rec.short_hash,
                "label": rec.label.value.value,
                "sources": list(rec.label.sources),
                "state": rec.state.state.value,
                "observed_at": format_ts(rec.state.observed_at) if rec.state.observed_at else None,
                "verdicts": [
                    {"provider": v.provider, "hit": v.hit, "category": v.category, "evidence": v.evidence,
                     "checked_at": format_ts(v.checked_at) if v.checked_at else None}
                    for v in rec.verdicts
                ],
            }) + "\n")


def load_labels(path) -> dict[str, Label]:
    labels = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            row = json.loads(raw)
            try:
                labels[row["short_hash"]] = Label(LabelValue(row["label"]), tuple(row["sources"]))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad label record: {exc}") from None
    return labels


# -- domain liveness ---------------------------------------------------------------


@dataclass(frozen=True)
class DomainLiveness:
    alive: bool
    total_warning_count: int


@dataclass
class LivenessReport:
    domains: dict[str, DomainLiveness] = field(default_factory=dict)

    @property
    def n_domains(self) -> int:
        return len(self.domains)

    @property
    def n_dead(self) -> int:
        return sum(not d.alive for d in self.domains.values())

    @property
    def dead_fraction(self) -> float:
        return self.n_dead / self.n_domains if self.domains else 0.0

    @property
    def dead_warning_sum(self) -> int:
        return sum(d.total_warning_count for d in self.domains.values() if not d.alive)

    def to_dict(self) -> dict:
        return {
            "n_domains": self.n_domains,
            "n_dead": self.n_dead,
            "dead_fraction": self.dead_fraction,
            "dead_warning_sum": self.dead_warning_sum,
            "domains": {d: {"alive": v.alive, "total_warning_count": v.total_warning_count}
                        for d, v in sorted(self.domains.items())},
        }


def domain_liveness_report(corpus: Corpus, probe, domains: Optional[Iterable[str]] = None,
                           whitelist: frozenset = frozenset()) -> LivenessReport:
    """Recheck every registrable domain; probe failures count as dead.

    ``domains`` restricts the check (e.g. to domains of malicious links);
    whitelisted domains are skipped entirely.
    """
    warnings: dict[str, int] = {}
    for link in corpus.links:
        warnings[link.domain] = warnings.get(link.domain, 0) + link.warning_count
    wanted = sorted(set(warnings) if domains is None else set(domains) & set(warnings))
    report = LivenessReport()
    for d in wanted:
        if d in whitelist:
            continue
        try:
            resp = probe.resolve(domain_probe_url(d))
            alive = resp.status < 400
        except Exception:  # noqa: BLE001
            alive = False
        report.domains[d] = DomainLiveness(alive, warnings[d])
    return report


def verdicts_from_dicts(rows) -> tuple[BlacklistVerdict, ...]:
    return tuple(
        BlacklistVerdict(r["provider"], r["hit"], r.get("category"),
                         parse_ts(r["checked_at"]) if r.get("checked_at") else None, r.get("evidence", "url"))
        for r in rows
    )
