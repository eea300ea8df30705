"""Registrable-domain extraction against a bundled public-suffix snapshot."""

from __future__ import annotations

import ipaddress
from functools import lru_cache
from importlib import resources
from urllib.parse import urlsplit

PSL_RESOURCE = "public_suffix_list.dat"
PSL_VERSION = "2019-12-21"


class SuffixList:
    """Public-suffix rules (normal, wildcard ``*.``, exception ``!``)."""

    def __init__(self, lines):
        self.rules: set[str] = set()
        self.wildcards: set[str] = set()
        self.exceptions: set[str] = set()
        for raw in lines:
            line = raw.strip()
            if not line or line.startswith("//"):
                continue
            rule = line.split()[0].lower()
            for form in _forms(rule):
                if form.startswith("!"):
                    self.exceptions.add(form[1:])
                elif form.startswith("*."):
                    self.wildcards.add(form[2:])
                else:
                    self.rules.add(form)

    def public_suffix(self, host: str) -> str:
        labels = host.split(".")
        # Scan from the longest candidate; the first match is the longest rule.
        for i in range(len(labels)):
            candidate = ".".join(labels[i:])
            if candidate in self.exceptions:
                return ".".join(labels[i + 1:])
            if candidate in self.rules:
                return candidate
            if i + 1 < len(labels) and ".".join(labels[i + 1:]) in self.wildcards:
                return candidate
        # Implicit "*" rule: the last label is a suffix.
        return labels[-1]

    def registrable(self, host: str) -> str:
        suffix = self.public_suffix(host)
        if host == suffix:
            raise ValueError(f"host {host!r} is itself a public suffix")
        head = host[: -len(suffix) - 1]
        return head.rsplit(".", 1)[-1] + "." + suffix


def _forms(rule: str):
    yield rule
    prefix = ""
    body = rule
    if rule[:1] == "!":
        prefix, body = "!", rule[1:]
    elif rule[:2] == "*.":
        prefix, body = "*.", rule[2:]
    try:
        ascii_body = body.encode("idna").decode("ascii")
    except UnicodeError:
        return
    if ascii_body != body:
        yield prefix + ascii_body


@lru_cache(maxsize=None)
def default_suffix_list() -> SuffixList:
    text = resources.files("malshort.data").joinpath(PSL_RESOURCE).read_text(encoding="utf-8")
    return SuffixList(text.splitlines())


def hostname(url: str) -> str:
    parts = urlsplit(url.strip())
    if not parts.scheme or not parts.netloc:
        raise ValueError(f"not an absolute URL: {url!r}")
    try:
        host = parts.hostname
    except ValueError as exc:
        raise ValueError(f"unparseable URL {url!r}: {exc}") from None
    if not host:
        raise ValueError(f"URL has no host: {url!r}")
    host = host.rstrip(".").lower()
    if not host or ".." in host or any(c.isspace() for c in host):
        raise ValueError(f"URL has an invalid host: {url!r}")
    return host


def registrable_domain(url: str, suffixes: SuffixList | None = None) -> str:
    """Lowercase registrable domain (eTLD+1) of an absolute URL.

    IP-literal hosts are returned unchanged. Raises ``ValueError`` for
    anything that is not an absolute URL with a usable host.
    """
    host = hostname(url)
    try:
        ipaddress.ip_address(host)
        return host
    except ValueError:
        pass
    return (suffixes or default_suffix_list()).registrable(host)
