"""Seeded synthetic corpus that stands in for crawled short-link analytics.

Malicious and benign links are drawn from different generative processes.
Each planted effect has a strength knob in :class:`GeneratorConfig`; the
generator also emits the offline fixture world (blacklist listings, probe
responses, whitelist) that the labeling stage replays.
"""

from __future__ import annotations

import json
import string
from dataclasses import asdict, dataclass, field, fields
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from malshort.core.model import (
    DIRECT,
    ClickEvent,
    ConnectedAccount,
    Corpus,
    EncoderKind,
    EncoderProfile,
    EncoderRef,
    HistoryEntry,
    Post,
    ReferrerStat,
    ShortLinkRecord,
    State,
    WhoisRecord,
)
from malshort.core.io import SCHEMA_VERSION, dumps, format_ts
from malshort.rng import child_rng

SHORT_BASE = "http://bit.ly/"
WARNING_URL = "http://bit.ly/a/warning"

BENIGN_TLDS = ("com", "org", "net", "co.uk", "de", "in", "com.au", "fr")
MALICIOUS_TLDS = ("ru", "in", "info", "tk", "biz", "com", "xyz", "pl")
REFERRER_SITES = (
    "twitter.com", "t.co", "facebook.com", "google.com", "reddit.com",
    "tumblr.com", "linkedin.com", "news.ycombinator.com", "discuss.com.hk",
)
APPS = ("twitterfeed", "tweetdeck", "tweetbot")
ANON = ("someone", "anonymous")
URL_PROVIDERS = ("safebrowsing", "phishtank", "virustotal")
DOMAIN_PROVIDERS = ("surbl",)

_ALNUM = string.ascii_letters + string.digits
_VOCAB = (
    "free", "win", "news", "video", "photo", "deal", "today", "music", "game",
    "love", "watch", "read", "new", "best", "click", "great", "check", "this",
    "out", "live", "world", "sport", "money", "home", "work", "blog", "post",
    "story", "city", "food", "travel", "tech", "app", "film", "show", "weekend",
    "party", "friends", "family", "school", "market", "health", "style", "car",
    "phone", "update", "review", "latest", "amazing", "funny", "cute", "cat",
    "dog", "art", "sale", "offer", "gift", "join",
) + tuple(f"w{i}" for i in range(400))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    n_benign: int = 1000
    n_malicious: int = 1000
    malicious_zero_click_fraction: float = 0.4616
    benign_zero_click_fraction: float = 0.35
    # probability a malicious link is created in the 00-05 UTC window
    odd_hour_strength: float = 0.6
    # probability a malicious domain is registered for ~1 year just before use
    short_lifetime_strength: float = 0.75
    # probability a clicked malicious link carries a DIRECT referrer
    direct_referrer_bias: float = 0.7
    # probability a clicked malicious link gets its first click days later
    slow_click_strength: float = 0.6
    anonymous_encoder_rate: float = 0.4
    multi_encoder_rate: float = 0.25
    # fraction of malicious links generated by the benign process
    noise_fraction: float = 0.05
    missing_whois_fraction: float = 0.03
    dead_domain_fraction: float = 0.8306
    warning_page_rate: float = 0.6
    n_bot_encoders: int = 5
    bot_history_size: int = 100
    campaign_size: int = 3
    links_per_malicious_domain: int = 8
    links_per_benign_domain: int = 4
    start: str = "2012-01-01"
    end: str = "2013-10-31"

    def validate(self) -> None:
        for name in ("n_benign", "n_malicious", "n_bot_encoders", "bot_history_size", "campaign_size"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        for name in ("links_per_malicious_domain", "links_per_benign_domain"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for f in fields(self):
            # every float-defaulted option is a probability or fraction
            if isinstance(f.default, float):
                value = getattr(self, f.name)
                if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                    raise ConfigError(f"{f.name} must lie in [0, 1], got {value!r}")
        if date.fromisoformat(self.start) >= date.fromisoformat(self.end):
            raise ConfigError("start must precede end")

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        known = cls.__dataclass_fields__
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown generator options: {sorted(unknown)}")
        return cls(**data)


@dataclass
class FixtureSet:
    """Offline replay of the outside world for one corpus."""

    blacklists: dict[str, list[str]] = field(default_factory=dict)
    probes: dict[str, dict] = field(default_factory=dict)
    whitelist: list[str] = field(default_factory=list)

    def write(self, directory) -> None:
        root = Path(directory)
        root.mkdir(parents=True, exist_ok=True)
        for provider in sorted(self.blacklists):
            lines = [f"# {provider} deny-list (synthetic)"] + sorted(set(self.blacklists[provider]))
            (root / f"blacklist_{provider}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
        with open(root / "probes.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for url in sorted(self.probes):
                fh.write(dumps({"url": url, **self.probes[url]}) + "\n")
        (root / "whitelist.txt").write_text(
            "\n".join(["# exploited legitimate domains"] + sorted(self.whitelist)) + "\n", encoding="utf-8"
        )


def short_url(short_hash: str) -> str:
    return SHORT_BASE + short_hash


def domain_probe_url(domain: str) -> str:
    return f"http://{domain}/"


def _token(rng, n) -> str:
    return "".join(_ALNUM[i] for i in rng.integers(0, len(_ALNUM), size=n))


def _word(rng, lo=6, hi=12) -> str:
    n = int(rng.integers(lo, hi + 1))
    return "".join(string.ascii_lowercase[i] for i in rng.integers(0, 26, size=n))


def _at_hour(day: date, hour: int, rng) -> datetime:
    return datetime(day.year, day.month, day.day, hour, tzinfo=timezone.utc) + timedelta(
        minutes=int(rng.integers(0, 60)), seconds=int(rng.integers(0, 60))
    )


def _pick_exact(rng, n: int, fraction: float) -> np.ndarray:
    """Boolean mask with exactly round(fraction * n) True entries."""
    mask = np.zeros(n, dtype=bool)
    k = int(round(fraction * n))
    if k:
        mask[rng.permutation(n)[:k]] = True
    return mask


class _World:
    def __init__(self, cfg: GeneratorConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.start = date.fromisoformat(cfg.start)
        self.end = date.fromisoformat(cfg.end)
        self.span = (self.end - self.start).days
        self.used_names: set[str] = set()
        self.used_hashes: set[str] = set()

    def unique_domain(self, rng, tlds) -> str:
        while True:
            name = f"{_word(rng)}.{tlds[int(rng.integers(0, len(tlds)))]}"
            if name not in self.used_names:
                self.used_names.add(name)
                return name

    def unique_hash(self, rng) -> str:
        while True:
            h = _token(rng, 7)
            if h not in self.used_hashes:
                self.used_hashes.add(h)
                return h

    def random_day(self, rng, lo=0, hi=None) -> date:
        hi = self.span if hi is None else hi
        return self.start + timedelta(days=int(rng.integers(lo, max(lo + 1, hi))))


def _benign_hour(rng) -> int:
    return int(np.clip(np.rint(rng.normal(14.0, 3.5)), 7, 23))


def generate_world(config: GeneratorConfig, seed: int) -> tuple[Corpus, FixtureSet]:
    """Build a synthetic corpus together with its labeling fixtures."""
    config.validate()
    cfg = config
    w = _World(cfg, seed)
    r_dom = child_rng(seed, "domains")
    r_link = child_rng(seed, "links")
    r_enc = child_rng(seed, "encoders")
    r_fix = child_rng(seed, "fixtures")
    r_post = child_rng(seed, "posts")

    # -- domains and WHOIS ---------------------------------------------------
    n_ben_dom = max(1, -(-cfg.n_benign // cfg.links_per_benign_domain)) if cfg.n_benign else 0
    n_mal_dom = max(1, -(-cfg.n_malicious // cfg.links_per_malicious_domain)) if cfg.n_malicious else 0
    benign_domains = [w.unique_domain(r_dom, BENIGN_TLDS) for _ in range(n_ben_dom)]
    malicious_domains = [w.unique_domain(r_dom, MALICIOUS_TLDS) for _ in range(n_mal_dom)]

    whois: dict[str, WhoisRecord | None] = {}
    # day offset (from start) at which a short-lived domain begins its campaign
    launch: dict[str, int] = {}
    for d in benign_domains:
        created = date(1996, 1, 1) + timedelta(days=int(r_dom.integers(0, 15 * 365)))
        years = int(r_dom.integers(2, 11))
        whois[d] = WhoisRecord(created, created + timedelta(days=365 * years // 2), created + timedelta(days=365 * years + int(r_dom.integers(0, 30))))
    short_lived = {}
    for d in malicious_domains:
        if r_dom.random() < cfg.short_lifetime_strength:
            off = int(r_dom.integers(0, max(1, w.span - 40)))
            created = w.start + timedelta(days=off)
            launch[d] = off
            short_lived[d] = True
            whois[d] = WhoisRecord(created, created, created + timedelta(days=365 + int(r_dom.integers(0, 3))))
        else:
            created = date(2000, 1, 1) + timedelta(days=int(r_dom.integers(0, 11 * 365)))
            years = int(r_dom.integers(1, 9))
            short_lived[d] = False
            whois[d] = WhoisRecord(created, created + timedelta(days=200), created + timedelta(days=365 * years + int(r_dom.integers(0, 30))))
    for d in benign_domains + malicious_domains:
        if r_dom.random() < cfg.missing_whois_fraction:
            whois[d] = None if r_dom.random() < 0.5 else WhoisRecord(None, whois[d].updated_on, whois[d].expires_on)

    # -- accounts ------------------------------------------------------------
    benign_users = [f"user_{_token(r_enc, 6).lower()}" for _ in range(max(1, cfg.n_benign // 3))] if cfg.n_benign else []
    bots = [f"o_{_token(r_enc, 10).lower()}" for _ in range(cfg.n_bot_encoders)] if cfg.n_malicious else []
    campaign = [f"o_{_token(r_enc, 10).lower()}" for _ in range(cfg.campaign_size)] if cfg.n_malicious else []
    spammers = [f"o_{_token(r_enc, 10).lower()}" for _ in range(max(1, cfg.n_malicious // 10))] if cfg.n_malicious else []

    # -- links ---------------------------------------------------------------
    n_total = cfg.n_benign + cfg.n_malicious
    is_mal = np.array([False] * cfg.n_benign + [True] * cfg.n_malicious)
    zero_click = np.zeros(n_total, dtype=bool)
    zero_click[: cfg.n_benign] = _pick_exact(r_link, cfg.n_benign, cfg.benign_zero_click_fraction)
    zero_click[cfg.n_benign:] = _pick_exact(r_link, cfg.n_malicious, cfg.malicious_zero_click_fraction)
    noise = np.zeros(n_total, dtype=bool)
    noise[cfg.n_benign:] = _pick_exact(r_link, cfg.n_malicious, cfg.noise_fraction)
    flagged = np.zeros(n_total, dtype=bool)
    flagged[cfg.n_benign:] = r_link.random(cfg.n_malicious) < cfg.warning_page_rate

    # campaign links: the first few malicious links, co-encoded by every campaign account
    n_campaign_links = min(cfg.n_malicious, 6) if campaign else 0
    campaign_idx = set(range(cfg.n_benign, cfg.n_benign + n_campaign_links))
    # bot links: every bot owns a handful of malicious links, all warning-flagged
    bot_owner: dict[int, str] = {}
    if bots:
        pool = [i for i in range(cfg.n_benign + n_campaign_links, n_total) if not noise[i]]
        for j, i in enumerate(pool[: 4 * len(bots)]):
            bot_owner[i] = bots[j % len(bots)]
            flagged[i] = True

    links: list[ShortLinkRecord] = []
    owners: dict[str, list[int]] = {}
    for i in range(n_total):
        mal = bool(is_mal[i])
        benign_process = not mal or bool(noise[i])
        if mal:
            domain = malicious_domains[int(r_link.integers(0, n_mal_dom))]
        else:
            domain = benign_domains[int(r_link.integers(0, n_ben_dom))]

        if mal and not noise[i] and short_lived.get(domain):
            day = w.start + timedelta(days=launch[domain] + int(r_link.integers(0, 30)))
        else:
            day = w.random_day(r_link)
        if benign_process:
            hour = _benign_hour(r_link)
        elif r_link.random() < cfg.odd_hour_strength:
            hour = int(r_link.integers(0, 6))
        else:
            hour = int(r_link.integers(0, 24))
        created_at = _at_hour(day, hour, r_link)

        # encoders
        encoders: list[EncoderRef] = []
        if i in campaign_idx:
            encoders = [EncoderRef(a) for a in campaign]
        elif i in bot_owner:
            encoders = [EncoderRef(bot_owner[i])]
        else:
            if benign_process:
                n_enc = 1 + int(r_link.random() < 0.15) + int(r_link.random() < 0.05)
                anon_rate = 0.08
                users = benign_users if benign_users else spammers
            else:
                n_enc = int(r_link.integers(2, 7)) if r_link.random() < cfg.multi_encoder_rate else 1
                anon_rate = cfg.anonymous_encoder_rate
                users = spammers
            for _ in range(n_enc):
                u = r_link.random()
                if u < anon_rate / 2:
                    encoders.append(EncoderRef(ANON[int(r_link.integers(0, 2))], EncoderKind.ANONYMOUS))
                elif u < anon_rate:
                    app = APPS[int(r_link.integers(0, len(APPS)))]
                    encoders.append(EncoderRef(app, EncoderKind.APPLICATION, app))
                else:
                    encoders.append(EncoderRef(users[int(r_link.integers(0, len(users)))]))

        # clicks and referrers
        clicks: list[ClickEvent] = []
        referrers: list[ReferrerStat] = []
        if not zero_click[i]:
            if benign_process:
                lag = 0 if r_link.random() < 0.8 else int(r_link.geometric(0.5))
            elif r_link.random() < cfg.slow_click_strength:
                lag = int(r_link.geometric(0.25))
            else:
                lag = 0
            first = created_at + timedelta(days=lag, minutes=int(r_link.integers(1, 600)))
            n_events = int(r_link.integers(1, 8))
            offsets = np.sort(r_link.integers(0, 20 * 24 * 60, size=n_events - 1))
            clicks.append(ClickEvent(first, int(r_link.integers(1, 20))))
            for off in offsets:
                clicks.append(ClickEvent(first + timedelta(minutes=int(off)), int(r_link.integers(1, 20))))
            sites = list(r_link.permutation(len(REFERRER_SITES)))
            if benign_process:
                n_sites = int(r_link.integers(1, 5))
                has_direct = r_link.random() < 0.25
            else:
                n_sites = int(r_link.integers(0, 3))
                has_direct = r_link.random() < cfg.direct_referrer_bias or n_sites == 0
            if has_direct:
                referrers.append(ReferrerStat(DIRECT, int(r_link.integers(1, 50))))
            for s in sites[:n_sites]:
                referrers.append(ReferrerStat(REFERRER_SITES[s], int(r_link.integers(0, 50))))

        sub = ("www.", "", "", f"{_word(r_link, 2, 5)}.")[int(r_link.integers(0, 4))]
        long_url = f"http://{sub}{domain}/{_word(r_link, 3, 10)}/{_token(r_link, 6)}"
        short_hash = w.unique_hash(r_link)
        link = ShortLinkRecord(
            short_hash=short_hash,
            global_hash=w.unique_hash(r_link),
            long_url=long_url,
            domain=domain,
            created_at=created_at,
            encoders=tuple(encoders),
            clicks=tuple(clicks),
            referrers=tuple(referrers),
            whois=whois[domain],
            warning_count=sum(c.count for c in clicks) if flagged[i] else 0,
        )
        links.append(link)
        for e in {e.account_id for e in encoders if e.kind is EncoderKind.REGULAR}:
            owners.setdefault(e, []).append(i)

    # -- encoder profiles ----------------------------------------------------
    profiles: dict[str, EncoderProfile] = {}
    campaign_urls = [links[i].long_url for i in sorted(campaign_idx)]
    template = frozenset(_VOCAB[int(k)] for k in r_post.choice(60, size=8, replace=False))
    for account in sorted(owners) + [b for b in bots if b not in owners]:
        idx = owners.get(account, [])
        history = [
            HistoryEntry(links[i].short_hash, links[i].created_at, links[i].total_clicks,
                         State.WARNING if flagged[i] else State.ACTIVE)
            for i in idx
        ]
        is_bot = account in bots
        if is_bot and len(history) < cfg.bot_history_size:
            for _ in range(cfg.bot_history_size - len(history)):
                ts = _at_hour(w.random_day(r_enc), int(r_enc.integers(0, 6)), r_enc)
                history.append(HistoryEntry(_token(r_enc, 7), ts, int(r_enc.integers(0, 30)), State.WARNING))
        history.sort(key=lambda h: (h.created_at, h.short_hash))
        first_seen = history[0].created_at if history else datetime(2012, 1, 1, tzinfo=timezone.utc)
        created = first_seen - timedelta(days=int(r_enc.integers(1, 400)))
        n_handles = int(r_enc.integers(3, 8)) if account in campaign else int(r_enc.integers(0, 2))
        connected = tuple(ConnectedAccount("twitter", f"{account}_{k}") for k in range(n_handles))

        own_urls = [links[i].long_url for i in idx]
        posts = []
        if account in campaign:
            for k in range(6):
                toks = set(template)
                if k % 3 == 0:
                    toks.add(_VOCAB[int(r_post.integers(0, len(_VOCAB)))])
                posts.append(Post(frozenset(toks), (campaign_urls[k % len(campaign_urls)],),
                                  _at_hour(w.random_day(r_post), int(r_post.integers(0, 24)), r_post)))
            # the campaign shares its full URL set across every member account
            posts.append(Post(frozenset(template), tuple(campaign_urls),
                              _at_hour(w.random_day(r_post), int(r_post.integers(0, 24)), r_post)))
        elif is_bot:
            # each bot repeats its own template, unrelated to the campaign's
            bot_template = frozenset(_VOCAB[int(k)] for k in r_post.choice(len(_VOCAB), size=8, replace=False))
            for k in range(10):
                ts = datetime.combine(w.random_day(r_post), datetime.min.time(), timezone.utc) + timedelta(hours=int(r_post.integers(0, 24)))
                posts.append(Post(bot_template, (own_urls[k % len(own_urls)],) if own_urls else (), ts))
        else:
            for k in range(min(5, max(1, len(own_urls)))):
                toks = frozenset(_VOCAB[int(t)] for t in r_post.integers(0, len(_VOCAB), size=8))
                urls = (own_urls[k],) if k < len(own_urls) else ()
                posts.append(Post(toks, urls, _at_hour(w.random_day(r_post), int(r_post.integers(0, 24)), r_post)))
        profiles[account] = EncoderProfile(account, created, connected, tuple(history), tuple(posts))

    truth = {links[i].short_hash: bool(is_mal[i]) for i in range(n_total)}

    # -- fixtures --------------------------------------------------------------
    fx = FixtureSet(blacklists={p: [] for p in URL_PROVIDERS + DOMAIN_PROVIDERS})
    surbl_domains = {d for d in malicious_domains if r_fix.random() < 0.35}
    hit_domain = {i: links[i].domain in surbl_domains for i in range(cfg.n_benign, n_total)}
    for i in range(cfg.n_benign, n_total):
        link = links[i]
        fired = flagged[i] or hit_domain[i]
        for p, rate in zip(URL_PROVIDERS, (0.3, 0.15, 0.3)):
            if r_fix.random() < rate:
                fx.blacklists[p].append(link.long_url)
                fired = True
        if not fired:
            fx.blacklists[URL_PROVIDERS[int(r_fix.integers(0, len(URL_PROVIDERS)))]].append(link.long_url)
    fx.blacklists["surbl"].extend(sorted(surbl_domains))
    if cfg.n_benign:
        exploited = links[int(r_fix.integers(0, cfg.n_benign))].domain
        fx.blacklists["surbl"].append(exploited)
        fx.whitelist.append(exploited)

    for i, link in enumerate(links):
        s = short_url(link.short_hash)
        if flagged[i]:
            warn = f"{WARNING_URL}?hash={link.short_hash}"
            fx.probes[s] = {"status": 301, "final_url": warn, "chain": [s, warn]}
        else:
            fx.probes[s] = {"status": 301, "final_url": link.long_url, "chain": [s, link.long_url]}
    dead = set()
    if malicious_domains:
        mask = _pick_exact(r_fix, n_mal_dom, cfg.dead_domain_fraction)
        dead = {d for d, m in zip(malicious_domains, mask) if m}
    for d in sorted(set(benign_domains) | set(malicious_domains)):
        u = domain_probe_url(d)
        if d in dead:
            if r_fix.random() < 0.5:
                fx.probes[u] = {"status": 404, "final_url": u, "chain": [u]}
            # otherwise no entry at all: the probe sees a connection failure
        else:
            fx.probes[u] = {"status": 200, "final_url": u, "chain": [u]}

    as_of = datetime.combine(w.end + timedelta(days=150), datetime.min.time(), timezone.utc)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "as_of": format_ts(as_of),
        "generator": {"seed": int(seed), "config": asdict(cfg)},
    }
    corpus = Corpus(links=tuple(links), encoders=profiles, truth=truth, manifest=manifest)
    return corpus, fx


def generate_synthetic(config: GeneratorConfig, seed: int) -> Corpus:
    """Deterministic synthetic corpus for ``(config, seed)``; truth in ``corpus.truth``."""
    return generate_world(config, seed)[0]


def config_json(config: GeneratorConfig) -> str:
    return json.dumps(asdict(config), sort_keys=True)
