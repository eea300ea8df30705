"""Domain types for short-link analytics.

Everything here is a frozen dataclass. Validation happens in
``__post_init__`` so a constructed object always satisfies its invariants.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Mapping, Optional

DIRECT = "DIRECT"
DEFAULT_ANONYMOUS_TOKENS = frozenset({"someone", "anonymous"})


class InvariantError(ValueError):
    """A record violates one of its type invariants."""


class EncoderKind(str, enum.Enum):
    REGULAR = "REGULAR"
    ANONYMOUS = "ANONYMOUS"
    APPLICATION = "APPLICATION"


class State(str, enum.Enum):
    ACTIVE = "ACTIVE"
    WARNING = "WARNING"
    DEAD = "DEAD"


def ensure_utc(ts: datetime, what: str = "timestamp") -> datetime:
    if not isinstance(ts, datetime):
        raise InvariantError(f"{what} is not a datetime: {ts!r}")
    if ts.tzinfo is None or ts.utcoffset() is None:
        raise InvariantError(f"{what} has no UTC offset: {ts.isoformat()}")
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class ClickEvent:
    at: datetime
    count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "at", ensure_utc(self.at, "click timestamp"))
        if not isinstance(self.count, int) or self.count < 1:
            raise InvariantError(f"click count must be >= 1, got {self.count!r}")


@dataclass(frozen=True)
class ReferrerStat:
    referrer: str
    clicks: int = 0

    def __post_init__(self):
        if not self.referrer:
            raise InvariantError("referrer must be non-empty")
        if not isinstance(self.clicks, int) or self.clicks < 0:
            raise InvariantError(f"referrer clicks must be >= 0, got {self.clicks!r}")

    @property
    def is_direct(self) -> bool:
        return self.referrer == DIRECT


@dataclass(frozen=True)
class EncoderRef:
    account_id: str
    kind: EncoderKind = EncoderKind.REGULAR
    application_name: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EncoderKind(self.kind))
        if not self.account_id:
            raise InvariantError("encoder account_id must be non-empty")
        if (self.kind is EncoderKind.APPLICATION) != (self.application_name is not None):
            raise InvariantError(
                f"encoder {self.account_id!r}: application_name must be set iff kind is APPLICATION"
            )

    def check_anonymous(self, tokens: frozenset = DEFAULT_ANONYMOUS_TOKENS) -> None:
        """Raise unless ``kind == ANONYMOUS`` exactly when the id is an anonymous token."""
        is_token = self.account_id.lower() in tokens
        if (self.kind is EncoderKind.ANONYMOUS) != is_token:
            raise InvariantError(
                f"encoder {self.account_id!r}: kind {self.kind.value} disagrees with anonymous-token set"
            )

    @classmethod
    def classify(
        cls,
        account_id: str,
        application_name: Optional[str] = None,
        tokens: frozenset = DEFAULT_ANONYMOUS_TOKENS,
    ) -> "EncoderRef":
        if application_name is not None:
            return cls(account_id, EncoderKind.APPLICATION, application_name)
        if account_id.lower() in tokens:
            return cls(account_id, EncoderKind.ANONYMOUS)
        return cls(account_id, EncoderKind.REGULAR)


@dataclass(frozen=True)
class WhoisRecord:
    created_on: Optional[date] = None
    updated_on: Optional[date] = None
    expires_on: Optional[date] = None

    def __post_init__(self):
        for name in ("created_on", "updated_on", "expires_on"):
            value = getattr(self, name)
            if isinstance(value, datetime):
                object.__setattr__(self, name, ensure_utc(value).date())
        if self.created_on and self.expires_on and self.created_on > self.expires_on:
            raise InvariantError(
                f"WHOIS created_on {self.created_on} is after expires_on {self.expires_on}"
            )


@dataclass(frozen=True)
class ShortLinkRecord:
    short_hash: str
    global_hash: str
    long_url: str
    domain: str
    created_at: datetime
    encoders: tuple[EncoderRef, ...]
    clicks: tuple[ClickEvent, ...] = ()
    referrers: tuple[ReferrerStat, ...] = ()
    whois: Optional[WhoisRecord] = None
    warning_count: int = 0

    def __post_init__(self):
        # Local import: domains imports nothing from here, but keep the
        # dependency one-way at module import time.
        from malshort.core.domains import registrable_domain

        object.__setattr__(self, "created_at", ensure_utc(self.created_at, "created_at"))
        object.__setattr__(self, "encoders", tuple(self.encoders))
        object.__setattr__(self, "clicks", tuple(self.clicks))
        object.__setattr__(self, "referrers", tuple(self.referrers))
        if not self.short_hash:
            raise InvariantError("short_hash must be non-empty")
        if not self.encoders:
            raise InvariantError(f"link {self.short_hash}: encoders list is empty")
        for click in self.clicks:
            if click.at < self.created_at:
                raise InvariantError(
                    f"link {self.short_hash}: click at {click.at.isoformat()} "
                    f"precedes created_at {self.created_at.isoformat()}"
                )
        if not isinstance(self.warning_count, int) or self.warning_count < 0:
            raise InvariantError(f"link {self.short_hash}: warning_count must be >= 0")
        try:
            expected = registrable_domain(self.long_url)
        except ValueError as exc:
            raise InvariantError(f"link {self.short_hash}: {exc}") from None
        if self.domain != expected:
            raise InvariantError(
                f"link {self.short_hash}: domain {self.domain!r} != registrable domain {expected!r}"
            )

    @property
    def total_clicks(self) -> int:
        return sum(c.count for c in self.clicks)


@dataclass(frozen=True)
class HistoryEntry:
    short_hash: str
    created_at: datetime
    click_count: int = 0
    state: State = State.ACTIVE

    def __post_init__(self):
        object.__setattr__(self, "created_at", ensure_utc(self.created_at))
        object.__setattr__(self, "state", State(self.state))
        if self.click_count < 0:
            raise InvariantError("history click_count must be >= 0")


@dataclass(frozen=True)
class Post:
    text_tokens: frozenset
    urls: tuple[str, ...] = ()
    at: Optional[datetime] = None

    def __post_init__(self):
        object.__setattr__(self, "text_tokens", frozenset(self.text_tokens))
        object.__setattr__(self, "urls", tuple(self.urls))
        if self.at is not None:
            object.__setattr__(self, "at", ensure_utc(self.at))
        for tok in self.text_tokens:
            if tok != tok.lower() or "://" in tok:
                raise InvariantError(f"post token {tok!r} is not lowercase and URL-free")


@dataclass(frozen=True)
class ConnectedAccount:
    network: str
    handle: str


@dataclass(frozen=True)
class EncoderProfile:
    account_id: str
    profile_created_at: Optional[datetime] = None
    connected_accounts: tuple[ConnectedAccount, ...] = ()
    history: tuple[HistoryEntry, ...] = ()
    posts: Optional[tuple[Post, ...]] = None

    def __post_init__(self):
        if self.profile_created_at is not None:
            object.__setattr__(self, "profile_created_at", ensure_utc(self.profile_created_at))
        object.__setattr__(self, "connected_accounts", tuple(self.connected_accounts))
        object.__setattr__(self, "history", tuple(self.history))
        if self.posts is not None:
            object.__setattr__(self, "posts", tuple(self.posts))
        for prev, cur in zip(self.history, self.history[1:]):
            if cur.created_at < prev.created_at:
                raise InvariantError(f"profile {self.account_id}: history not sorted by created_at")


@dataclass(frozen=True)
class Corpus:
    links: tuple[ShortLinkRecord, ...] = ()
    encoders: Mapping[str, EncoderProfile] = field(default_factory=dict)
    # short_hash -> malicious; sidecar ground truth, only set for synthetic corpora
    truth: Optional[Mapping[str, bool]] = None
    manifest: Mapping = field(default_factory=lambda: {"schema_version": 1})

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        for link in self.links:
            for enc in link.encoders:
                if enc.kind is EncoderKind.REGULAR and enc.account_id not in self.encoders:
                    raise InvariantError(
                        f"link {link.short_hash}: encoder {enc.account_id!r} has no profile"
                    )

    def __len__(self) -> int:
        return len(self.links)

    def whois_by_domain(self) -> dict[str, WhoisRecord]:
        out = {}
        for link in self.links:
            if link.whois is not None:
                out.setdefault(link.domain, link.whois)
        return out

    def domains(self) -> list[str]:
        return sorted({link.domain for link in self.links})
