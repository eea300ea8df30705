"""JSONL corpus layout: read, write, and RFC 3339 timestamp handling."""

from __future__ import annotations

import json
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Iterator, Optional

from malshort.core.model import (
    DEFAULT_ANONYMOUS_TOKENS,
    ClickEvent,
    ConnectedAccount,
    Corpus,
    EncoderKind,
    EncoderProfile,
    EncoderRef,
    HistoryEntry,
    InvariantError,
    Post,
    ReferrerStat,
    ShortLinkRecord,
    WhoisRecord,
)

SCHEMA_VERSION = 1

LINKS_FILE = "links.jsonl"
WHOIS_FILE = "whois.jsonl"
ENCODERS_FILE = "encoders.jsonl"
TRUTH_FILE = "truth.jsonl"
MANIFEST_FILE = "MANIFEST.json"


class SchemaError(ValueError):
    """A corpus file does not match the expected layout."""

    def __init__(self, path, line: int, field: str, message: str):
        self.path = str(path)
        self.line = line
        self.field = field
        super().__init__(f"{path}:{line}: field {field!r}: {message}")


def format_ts(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc)
    spec = "microseconds" if ts.microsecond else "seconds"
    return ts.isoformat(timespec=spec).replace("+00:00", "Z")


def parse_ts(text: str) -> datetime:
    if not isinstance(text, str):
        raise ValueError(f"expected RFC 3339 string, got {text!r}")
    raw = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
    ts = datetime.fromisoformat(raw)
    if ts.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return ts.astimezone(timezone.utc)


def _parse_date(text: Optional[str]) -> Optional[date]:
    if text is None:
        return None
    return date.fromisoformat(text)


def _fmt_date(d: Optional[date]) -> Optional[str]:
    return d.isoformat() if d is not None else None


def dumps(obj: Any) -> str:
    """Canonical JSON: sorted keys, compact separators, UTF-8 safe."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# -- record <-> dict ---------------------------------------------------------

def link_to_dict(link: ShortLinkRecord) -> dict:
    return {
        "short_hash": link.short_hash,
        "global_hash": link.global_hash,
        "long_url": link.long_url,
        "domain": link.domain,
        "created_at": format_ts(link.created_at),
        "encoders": [
            {"account_id": e.account_id, "kind": e.kind.value, "application_name": e.application_name}
            for e in link.encoders
        ],
        "clicks": [{"at": format_ts(c.at), "count": c.count} for c in link.clicks],
        "referrers": [{"referrer": r.referrer, "clicks": r.clicks} for r in link.referrers],
        "warning_count": link.warning_count,
    }


def whois_to_dict(domain: str, w: WhoisRecord) -> dict:
    return {
        "domain": domain,
        "created_on": _fmt_date(w.created_on),
        "updated_on": _fmt_date(w.updated_on),
        "expires_on": _fmt_date(w.expires_on),
    }


def profile_to_dict(p: EncoderProfile) -> dict:
    return {
        "account_id": p.account_id,
        "profile_created_at": format_ts(p.profile_created_at) if p.profile_created_at else None,
        "connected_accounts": [{"network": c.network, "handle": c.handle} for c in p.connected_accounts],
        "history": [
            {
                "short_hash": h.short_hash,
                "created_at": format_ts(h.created_at),
                "click_count": h.click_count,
                "state": h.state.value,
            }
            for h in p.history
        ],
        "posts": None
        if p.posts is None
        else [
            {
                "text_tokens": sorted(post.text_tokens),
                "urls": list(post.urls),
                "at": format_ts(post.at) if post.at else None,
            }
            for post in p.posts
        ],
    }


class _Reader:
    """Pulls typed fields out of one JSON object, naming the line on failure."""

    def __init__(self, path, line: int, obj: Any):
        if not isinstance(obj, dict):
            raise SchemaError(path, line, "<record>", "expected a JSON object")
        self.path, self.line, self.obj = path, line, obj

    def get(self, key, kind=None, optional=False, parse=None, prefix=""):
        obj = self.obj
        if key not in obj or obj[key] is None:
            if optional:
                return None
            raise SchemaError(self.path, self.line, prefix + key, "missing")
        value = obj[key]
        if kind is not None and not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
            raise SchemaError(self.path, self.line, prefix + key, f"expected {_kind_name(kind)}")
        if parse is not None:
            try:
                value = parse(value)
            except (TypeError, ValueError) as exc:
                raise SchemaError(self.path, self.line, prefix + key, str(exc)) from None
        return value


def _kind_name(kind) -> str:
    if isinstance(kind, tuple):
        return "/".join(k.__name__ for k in kind)
    return kind.__name__


def _items(r: _Reader, key: str, optional=False):
    value = r.get(key, list, optional=optional)
    for i, item in enumerate(value or ()):
        yield f"{key}[{i}].", _Reader(r.path, r.line, item)


def link_from_dict(r: _Reader, whois: Optional[WhoisRecord], tokens=DEFAULT_ANONYMOUS_TOKENS) -> ShortLinkRecord:
    encoders = []
    for pre, e in _items(r, "encoders"):
        kind = e.get("kind", str, optional=True, prefix=pre)
        app = e.get("application_name", str, optional=True, prefix=pre)
        account = e.get("account_id", str, prefix=pre)
        if kind is None:
            ref = EncoderRef.classify(account, app, tokens)
        else:
            if kind not in EncoderKind.__members__:
                raise SchemaError(r.path, r.line, pre + "kind", f"unknown encoder kind {kind!r}")
            ref = EncoderRef(account, EncoderKind(kind), app)
        ref.check_anonymous(tokens)
        encoders.append(ref)
    clicks = [
        ClickEvent(c.get("at", str, parse=parse_ts, prefix=pre), c.get("count", int, prefix=pre))
        for pre, c in _items(r, "clicks", optional=True)
    ]
    referrers = [
        ReferrerStat(x.get("referrer", str, prefix=pre), x.get("clicks", int, prefix=pre))
        for pre, x in _items(r, "referrers", optional=True)
    ]
    return ShortLinkRecord(
        short_hash=r.get("short_hash", str),
        global_hash=r.get("global_hash", str),
        long_url=r.get("long_url", str),
        domain=r.get("domain", str),
        created_at=r.get("created_at", str, parse=parse_ts),
        encoders=tuple(encoders),
        clicks=tuple(clicks),
        referrers=tuple(referrers),
        whois=whois,
        warning_count=r.get("warning_count", int, optional=True) or 0,
    )


def profile_from_dict(r: _Reader) -> EncoderProfile:
    history = tuple(
        HistoryEntry(
            short_hash=h.get("short_hash", str, prefix=pre),
            created_at=h.get("created_at", str, parse=parse_ts, prefix=pre),
            click_count=h.get("click_count", int, optional=True, prefix=pre) or 0,
            state=h.get("state", str, optional=True, prefix=pre) or "ACTIVE",
        )
        for pre, h in _items(r, "history", optional=True)
    )
    posts = None
    if r.obj.get("posts") is not None:
        posts = tuple(
            Post(
                text_tokens=frozenset(p.get("text_tokens", list, prefix=pre)),
                urls=tuple(p.get("urls", list, optional=True, prefix=pre) or ()),
                at=p.get("at", str, optional=True, parse=parse_ts, prefix=pre),
            )
            for pre, p in _items(r, "posts")
        )
    created = r.get("profile_created_at", str, optional=True, parse=parse_ts)
    return EncoderProfile(
        account_id=r.get("account_id", str),
        profile_created_at=created,
        connected_accounts=tuple(
            ConnectedAccount(c.get("network", str, prefix=pre), c.get("handle", str, prefix=pre))
            for pre, c in _items(r, "connected_accounts", optional=True)
        ),
        history=history,
        posts=posts,
    )


# -- files -------------------------------------------------------------------

def _read_jsonl(path: Path) -> Iterator[tuple[int, Any]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                yield lineno, json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(path, lineno, "<line>", f"invalid JSON: {exc.msg}") from None


def _wrap_invariant(path, lineno, fn):
    try:
        return fn()
    except SchemaError:
        raise
    except InvariantError as exc:
        raise InvariantError(f"{path}:{lineno}: {exc}") from None


def load_corpus(path, anonymous_tokens=DEFAULT_ANONYMOUS_TOKENS) -> Corpus:
    """Load a corpus directory (or a bare ``links.jsonl`` file)."""
    path = Path(path)
    root = path if path.is_dir() else path.parent
    links_path = path if path.is_file() else root / LINKS_FILE
    if not links_path.exists():
        raise FileNotFoundError(f"no {LINKS_FILE} at {path}")

    manifest = {"schema_version": SCHEMA_VERSION}
    if (root / MANIFEST_FILE).exists():
        manifest = json.loads((root / MANIFEST_FILE).read_text(encoding="utf-8"))
        if manifest.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(root / MANIFEST_FILE, 1, "schema_version",
                              f"unsupported version {manifest.get('schema_version')!r}")

    whois: dict[str, WhoisRecord] = {}
    if (root / WHOIS_FILE).exists():
        wpath = root / WHOIS_FILE
        for lineno, obj in _read_jsonl(wpath):
            r = _Reader(wpath, lineno, obj)
            whois[r.get("domain", str)] = _wrap_invariant(wpath, lineno, lambda: WhoisRecord(
                created_on=r.get("created_on", str, optional=True, parse=_parse_date),
                updated_on=r.get("updated_on", str, optional=True, parse=_parse_date),
                expires_on=r.get("expires_on", str, optional=True, parse=_parse_date),
            ))

    encoders: dict[str, EncoderProfile] = {}
    if (root / ENCODERS_FILE).exists():
        epath = root / ENCODERS_FILE
        for lineno, obj in _read_jsonl(epath):
            r = _Reader(epath, lineno, obj)
            prof = _wrap_invariant(epath, lineno, lambda: profile_from_dict(r))
            encoders[prof.account_id] = prof

    links = []
    for lineno, obj in _read_jsonl(links_path):
        r = _Reader(links_path, lineno, obj)
        domain = r.get("domain", str)
        links.append(_wrap_invariant(
            links_path, lineno, lambda: link_from_dict(r, whois.get(domain), anonymous_tokens)
        ))

    truth = None
    if (root / TRUTH_FILE).exists():
        truth = {}
        tpath = root / TRUTH_FILE
        for lineno, obj in _read_jsonl(tpath):
            r = _Reader(tpath, lineno, obj)
            truth[r.get("short_hash", str)] = r.get("malicious", bool)

    return Corpus(links=tuple(links), encoders=encoders, truth=truth, manifest=manifest)


def save_corpus(corpus: Corpus, path) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)

    whois: dict[str, WhoisRecord] = {}
    for link in corpus.links:
        if link.whois is None:
            continue
        prior = whois.setdefault(link.domain, link.whois)
        if prior != link.whois:
            raise InvariantError(f"domain {link.domain}: links carry conflicting WHOIS records")

    def write(name, rows):
        with open(root / name, "w", encoding="utf-8", newline="\n") as fh:
            for row in rows:
                fh.write(dumps(row) + "\n")

    write(LINKS_FILE, (link_to_dict(l) for l in corpus.links))
    write(WHOIS_FILE, (whois_to_dict(d, whois[d]) for d in sorted(whois)))
    write(ENCODERS_FILE, (profile_to_dict(corpus.encoders[a]) for a in sorted(corpus.encoders)))
    if corpus.truth is not None:
        write(TRUTH_FILE, ({"short_hash": h, "malicious": bool(v)} for h, v in sorted(corpus.truth.items())))
    elif (root / TRUTH_FILE).exists():
        (root / TRUTH_FILE).unlink()
    manifest = dict(corpus.manifest)
    manifest["schema_version"] = SCHEMA_VERSION
    (root / MANIFEST_FILE).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
