from malshort.core.domains import registrable_domain
from malshort.core.model import (
    DIRECT,
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
    State,
    WhoisRecord,
)

__all__ = [
    "DIRECT",
    "ClickEvent",
    "ConnectedAccount",
    "Corpus",
    "EncoderKind",
    "EncoderProfile",
    "EncoderRef",
    "HistoryEntry",
    "InvariantError",
    "Post",
    "ReferrerStat",
    "ShortLinkRecord",
    "State",
    "WhoisRecord",
    "registrable_domain",
]
