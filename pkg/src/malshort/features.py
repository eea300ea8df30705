"""The seven short-link features, under the FULL and NON_CLICK schemas.

``None`` is the MISSING marker throughout; it serializes as JSON ``null`` and
as an empty CSV cell.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass
from datetime import date, datetime, time, timezone
from typing import Iterable, Optional, Sequence

from malshort.core.model import EncoderKind, ShortLinkRecord, WhoisRecord
from malshort.labeling import Label, LabelValue, NO_SOURCE

log = logging.getLogger(__name__)

SECONDS_PER_DAY = 86_400


class Schema(str, enum.Enum):
    FULL = "FULL"
    NON_CLICK = "NON_CLICK"


NON_CLICK_FEATURES = ("domain_age", "creation_gap", "creation_hour", "encoder_count", "encoder_type_ratio")
CLICK_FEATURES = ("click_lag", "direct_ratio")
FEATURES = {
    Schema.FULL: NON_CLICK_FEATURES + CLICK_FEATURES,
    Schema.NON_CLICK: NON_CLICK_FEATURES,
}
DISPLAY_NAMES = {
    "domain_age": "Domain age",
    "creation_gap": "Link Creation domain creation difference",
    "creation_hour": "Link creation hour",
    "encoder_count": "Number of encoders",
    "encoder_type_ratio": "Type of encoders",
    "click_lag": "Link creation-click lag",
    "direct_ratio": "Type of referring domains",
}


def feature_names(schema: Schema) -> tuple[str, ...]:
    return FEATURES[Schema(schema)]


@dataclass(frozen=True)
class FeatureVector:
    schema: Schema
    domain_age: Optional[int]
    creation_gap: Optional[int]
    creation_hour: int
    encoder_count: int
    encoder_type_ratio: float
    click_lag: Optional[int] = None
    direct_ratio: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "schema", Schema(self.schema))
        if not 0 <= self.creation_hour <= 23:
            raise ValueError(f"creation_hour out of range: {self.creation_hour}")
        if self.encoder_count < 1:
            raise ValueError("encoder_count must be positive")
        if not 0.0 <= self.encoder_type_ratio <= 1.0:
            raise ValueError("encoder_type_ratio outside [0, 1]")
        if self.schema is Schema.NON_CLICK:
            if self.click_lag is not None or self.direct_ratio is not None:
                raise ValueError("NON_CLICK vectors carry no click features")
        elif self.direct_ratio is None or not 0.0 <= self.direct_ratio <= 1.0:
            raise ValueError("FULL vectors need direct_ratio in [0, 1]")

    def values(self) -> tuple:
        return tuple(getattr(self, n) for n in feature_names(self.schema))

    def as_list(self) -> list[float]:
        """Numeric row with ``nan`` standing in for MISSING."""
        return [math.nan if v is None else float(v) for v in self.values()]

    def restrict(self, schema: Schema) -> "FeatureVector":
        schema = Schema(schema)
        if schema is self.schema:
            return self
        if schema is Schema.FULL:
            raise ValueError("cannot widen a NON_CLICK vector")
        return FeatureVector(schema, self.domain_age, self.creation_gap, self.creation_hour,
                             self.encoder_count, self.encoder_type_ratio)


@dataclass(frozen=True)
class LabeledInstance:
    link_id: str
    features: FeatureVector
    label: Label

    @property
    def malicious(self) -> bool:
        return self.label.malicious


def _midnight(d: date) -> datetime:
    return datetime.combine(d, time(0), timezone.utc)


def _floor_days(later: datetime, earlier: datetime) -> int:
    return math.floor((later - earlier).total_seconds() / SECONDS_PER_DAY)


def domain_age(whois: Optional[WhoisRecord]) -> Optional[int]:
    """Registration span in days, from creation (else last update) to expiry."""
    if whois is None or whois.expires_on is None:
        return None
    start = whois.created_on or whois.updated_on
    if start is None:
        return None
    days = _floor_days(_midnight(whois.expires_on), _midnight(start))
    if days < 0:
        log.warning("corrupt WHOIS: expiry %s precedes %s", whois.expires_on, start)
        return None
    return days


def creation_gap(whois: Optional[WhoisRecord], link: ShortLinkRecord) -> Optional[int]:
    if whois is None or whois.created_on is None:
        return None
    return _floor_days(link.created_at, _midnight(whois.created_on))


def creation_hour(link: ShortLinkRecord) -> int:
    return link.created_at.astimezone(timezone.utc).hour


def encoder_count(link: ShortLinkRecord) -> int:
    # anonymous encoders have no identity, so every occurrence counts
    named = {e.account_id for e in link.encoders if e.kind is not EncoderKind.ANONYMOUS}
    anonymous = sum(e.kind is EncoderKind.ANONYMOUS for e in link.encoders)
    return len(named) + anonymous


def encoder_type_ratio(link: ShortLinkRecord) -> float:
    odd = sum(e.kind in (EncoderKind.ANONYMOUS, EncoderKind.APPLICATION) for e in link.encoders)
    return odd / len(link.encoders)


def click_lag(link: ShortLinkRecord) -> Optional[int]:
    if not link.clicks:
        return None
    return _floor_days(min(c.at for c in link.clicks), link.created_at)


def direct_referrer_ratio(link: ShortLinkRecord) -> float:
    if not link.referrers:
        return 0.0
    return sum(r.is_direct for r in link.referrers) / len(link.referrers)


def extract(link: ShortLinkRecord, whois: Optional[WhoisRecord] = None, schema: Schema = Schema.FULL) -> FeatureVector:
    """Feature vector for one link. ``whois`` defaults to the link's own record."""
    schema = Schema(schema)
    whois = link.whois if whois is None else whois
    common = (domain_age(whois), creation_gap(whois, link), creation_hour(link),
              encoder_count(link), encoder_type_ratio(link))
    if schema is Schema.NON_CLICK:
        return FeatureVector(schema, *common)
    return FeatureVector(schema, *common, click_lag(link), direct_referrer_ratio(link))


# -- CSV ---------------------------------------------------------------------------

CSV_LABEL_COLUMN = "label"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(instances: Sequence[LabeledInstance], path, schema: Schema) -> None:
    schema = Schema(schema)
    names = feature_names(schema)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["link_id", "schema", *names, CSV_LABEL_COLUMN])
        for inst in instances:
            fv = inst.features.restrict(schema)
            writer.writerow([inst.link_id, schema.value, *(_cell(v) for v in fv.values()),
                             inst.label.value.value])


def _parse_num(text: str, integral: bool):
    if text == "":
        return None
    return int(text) if integral else float(text)


_INTEGRAL = {"domain_age", "creation_gap", "creation_hour", "encoder_count", "click_lag"}


def read_csv(path) -> list[LabeledInstance]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            schema = Schema(row["schema"])
            vals = {n: _parse_num(row[n], n in _INTEGRAL) for n in feature_names(schema)}
            value = LabelValue(row[CSV_LABEL_COLUMN])
            # sources are not carried by the CSV; record a placeholder
            sources = ("csv",) if value is LabelValue.MALICIOUS else (NO_SOURCE,)
            out.append(LabeledInstance(row["link_id"], FeatureVector(schema, **vals), Label(value, sources)))
    return out


def build_instances(links: Iterable[ShortLinkRecord], labels, schema: Schema) -> list[LabeledInstance]:
    """Pair each labeled link with its feature vector; unlabeled links are skipped."""
    out = []
    for link in links:
        label = labels.get(link.short_hash)
        if label is None:
            continue
        out.append(LabeledInstance(link.short_hash, extract(link, None, schema), label))
    return out
