"""URL normalization, redirect-chain tracing, and URL-derived features.

Shortened links are expanded by following redirects hop by hop with an
explicit fetcher, once with a browser identity and once with a crawler
identity, so that pages serving different destinations to each (a common
cloaking trick) can be detected.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from urllib.parse import urljoin, urlsplit

import requests

SENTINEL = -1.0

_SCHEME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.-]*://")
_HOST_LABEL_RE = re.compile(r"^[a-z0-9_]([a-z0-9_-]*[a-z0-9_])?$")
_IPV4_RE = re.compile(r"^\d{1,3}(\.\d{1,3}){3}$")

_DEFAULT_PORTS = {"http": 80, "https": 443}


class UrlParseError(ValueError):
    def __init__(self, message: str, index: int | None = None):
        if index is not None:
            message = f"{message} (index {index})"
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class NormalizedUrl:
    scheme: str
    host: str
    port: int | None  # None means the scheme default
    path: str
    query: str

    def __str__(self) -> str:
        netloc = self.host if self.port is None else f"{self.host}:{self.port}"
        out = f"{self.scheme}://{netloc}{self.path}"
        if self.query:
            out += f"?{self.query}"
        return out


def _encode_host(host: str, raw: str) -> str:
    host = host.rstrip(".").lower()
    if not host:
        raise UrlParseError(f"no host in {raw!r}")
    if host.startswith("[") and host.endswith("]"):
        return host  # IPv6 literal, keep as-is
    if not host.isascii():
        try:
            host = host.encode("idna").decode("ascii")
        except UnicodeError as exc:
            raise UrlParseError(f"cannot IDNA-encode host {host!r}: {exc}") from exc
    for label in host.split("."):
        if not _HOST_LABEL_RE.match(label):
            raise UrlParseError(f"invalid host label {label!r} in {raw!r}")
    return host


def normalize_url(url: str) -> NormalizedUrl:
    """Canonicalize a URL: default scheme http, lowercase IDNA host, no
    fragment, no default port, path at least "/". Idempotent.

    Raises UrlParseError (with the character index where applicable) on
    embedded whitespace, control characters, bad ports, or invalid hosts.
    """
    if not url or not url.strip():
        raise UrlParseError("empty URL")
    url = url.strip()
    for i, ch in enumerate(url):
        if ch.isspace() or ord(ch) < 0x20 or ord(ch) == 0x7F:
            raise UrlParseError(f"whitespace or control character in URL {url!r}", index=i)

    if not _SCHEME_RE.match(url):
        url = "http://" + url

    parts = urlsplit(url)
    scheme = parts.scheme.lower()
    if scheme not in ("http", "https"):
        raise UrlParseError(f"unsupported scheme {scheme!r}")

    host = _encode_host(parts.hostname or "", url)
    try:
        port = parts.port
    except ValueError as exc:
        raise UrlParseError(f"invalid port in {url!r}") from exc
    if port == _DEFAULT_PORTS[scheme]:
        port = None

    path = parts.path or "/"
    return NormalizedUrl(scheme=scheme, host=host, port=port, path=path, query=parts.query)


class PublicSuffixList:
    """Suffix rules for splitting a host into registrable domain + subdomains.

    Follows the usual rule semantics: longest match wins, "*" matches one
    label, "!" rules carve exceptions out of wildcards, and an unknown TLD
    falls back to the single-label default rule.
    """

    def __init__(self, rules: list[str]):
        self._plain: set[tuple[str, ...]] = set()
        self._exceptions: set[tuple[str, ...]] = set()
        for rule in rules:
            rule = rule.strip().lower()
            if not rule or rule.startswith("//"):
                continue
            if rule.startswith("!"):
                self._exceptions.add(tuple(reversed(rule[1:].split("."))))
            else:
                self._plain.add(tuple(reversed(rule.split("."))))

    @classmethod
    def from_file(cls, path: str | Path) -> "PublicSuffixList":
        return cls(Path(path).read_text(encoding="utf-8").splitlines())

    @classmethod
    def bundled(cls) -> "PublicSuffixList":
        from importlib.resources import files

        text = files("phishscan.data").joinpath("public_suffix_list.dat").read_text("utf-8")
        return cls(text.splitlines())

    def _suffix_length(self, labels_rev: tuple[str, ...]) -> int:
        for n in range(len(labels_rev), 0, -1):
            if labels_rev[:n] in self._exceptions:
                return n - 1
        best = 1  # default "*" rule: the bare TLD
        for n in range(1, len(labels_rev) + 1):
            head = labels_rev[:n]
            if head in self._plain or (n > 1 and head[:-1] + ("*",) in self._plain):
                best = max(best, n)
        return best

    def registrable_domain(self, host: str) -> str:
        """The public suffix plus one label; the host itself when it is an
        IPv4 address or is no longer than the matched suffix."""
        host = host.rstrip(".").lower()
        if _is_ipv4(host) or host.startswith("["):
            return host
        labels = host.split(".")
        suffix_len = self._suffix_length(tuple(reversed(labels)))
        if len(labels) <= suffix_len:
            return host
        return ".".join(labels[-(suffix_len + 1):])

    def subdomain_count(self, host: str) -> int:
        host = host.rstrip(".").lower()
        if _is_ipv4(host) or host.startswith("["):
            return 0
        registrable = self.registrable_domain(host)
        return len(host.split(".")) - len(registrable.split("."))


def _is_ipv4(host: str) -> bool:
    if not _IPV4_RE.match(host):
        return False
    return all(int(octet) <= 255 for octet in host.split("."))


def levenshtein(a: str, b: str) -> int:
    """Edit distance (insert, delete, substitute; unit costs)."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def hop_levenshtein(hops: list[str]) -> float:
    """Mean edit distance between consecutive hop URLs; 0.0 for short chains."""
    if len(hops) < 2:
        return 0.0
    total = sum(levenshtein(hops[i], hops[i + 1]) for i in range(len(hops) - 1))
    return total / (len(hops) - 1)


class AgentProfile(Enum):
    BROWSER = "browser"
    BOT = "bot"

    @property
    def user_agent(self) -> str:
        if self is AgentProfile.BROWSER:
            return (
                "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 "
                "(KHTML, like Gecko) Chrome/120.0 Safari/537.36"
            )
        return "Mozilla/5.0 (compatible; Googlebot/2.1; +http://www.google.com/bot.html)"


class FetchError(Exception):
    pass


class TraceError(Exception):
    """The very first request of a chain could not be made."""


@dataclass(frozen=True)
class FetchResponse:
    status: int
    location: str | None = None


class FixtureUrlFetcher:
    """Replays canned responses from a JSON map of url -> response.

    A response is either {"status": ..., "location": ...} or a pair keyed
    by agent name when the server answers browsers and crawlers differently:
    {"browser": {...}, "bot": {...}}. URLs absent from the map behave as
    network failures.
    """

    def __init__(self, responses: dict):
        self._responses: dict[str, dict] = {}
        for url, value in responses.items():
            self._responses[str(normalize_url(url))] = value

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureUrlFetcher":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def fetch(self, url: str, agent: AgentProfile = AgentProfile.BROWSER) -> FetchResponse:
        key = str(normalize_url(url))
        value = self._responses.get(key)
        if value is None:
            raise FetchError(f"no fixture response for {key}")
        if "browser" in value or "bot" in value:
            value = value.get(agent.value)
            if value is None:
                raise FetchError(f"no fixture response for {key} as {agent.value}")
        return FetchResponse(status=int(value["status"]), location=value.get("location"))


class LiveUrlFetcher:
    """Single-request fetcher over HTTP; never follows redirects itself."""

    def __init__(self, timeout: float = 3.0):
        self._timeout = timeout
        self._session = requests.Session()

    def fetch(self, url: str, agent: AgentProfile = AgentProfile.BROWSER) -> FetchResponse:
        try:
            resp = self._session.get(
                url,
                allow_redirects=False,
                timeout=self._timeout,
                headers={"User-Agent": agent.user_agent},
            )
        except requests.RequestException as exc:
            raise FetchError(str(exc)) from exc
        return FetchResponse(status=resp.status_code, location=resp.headers.get("Location"))


@dataclass(frozen=True)
class RedirectTrace:
    hops: tuple[str, ...]  # normalized URLs, starting URL included
    statuses: tuple[int, ...]  # each 3xx that offered a Location
    final_status: int | None
    truncated: bool = False
    failed: bool = False

    @property
    def landing_url(self) -> str:
        return self.hops[-1]

    @property
    def num_redirects(self) -> int:
        return len(self.statuses)


def trace_redirects(
    fetcher,
    url: str,
    agent: AgentProfile = AgentProfile.BROWSER,
    max_hops: int = 10,
) -> RedirectTrace:
    """Follow Location headers from url until a non-redirect response.

    Chains are cut at max_hops visited URLs or on revisiting a URL (loop);
    both set truncated. A failure after the first hop sets failed and keeps
    the partial chain; a failure on the first hop raises TraceError.
    """
    try:
        start = str(normalize_url(url))
    except UrlParseError as exc:
        raise TraceError(f"bad start URL: {exc}") from exc

    hops = [start]
    statuses: list[int] = []
    current = start
    while True:
        try:
            resp = fetcher.fetch(current, agent)
        except FetchError as exc:
            if len(hops) == 1:
                raise TraceError(f"cannot fetch {current}: {exc}") from exc
            return RedirectTrace(tuple(hops), tuple(statuses), None, failed=True)

        if not (300 <= resp.status < 400 and resp.location):
            return RedirectTrace(tuple(hops), tuple(statuses), resp.status)

        statuses.append(resp.status)
        try:
            nxt = str(normalize_url(urljoin(current, resp.location)))
        except UrlParseError:
            return RedirectTrace(tuple(hops), tuple(statuses), resp.status, truncated=True)
        if nxt in hops or len(hops) >= max_hops:
            return RedirectTrace(tuple(hops), tuple(statuses), resp.status, truncated=True)
        hops.append(nxt)
        current = nxt


def detect_conditional_redirect(fetcher, url: str, psl: PublicSuffixList) -> int:
    """1 when browser and crawler land on different registrable domains,
    0 when they agree, -1 when either chain cannot be completed."""
    landings = []
    for agent in (AgentProfile.BROWSER, AgentProfile.BOT):
        try:
            trace = trace_redirects(fetcher, url, agent=agent)
        except TraceError:
            return int(SENTINEL)
        if trace.failed:
            return int(SENTINEL)
        landings.append(psl.registrable_domain(normalize_url(trace.landing_url).host))
    return 1 if landings[0] != landings[1] else 0


def extract_url_features(fetcher, psl: PublicSuffixList, url: str) -> dict[str, float]:
    """The six URL-group feature slots for one posted URL.

    Length, dot count, and subdomain count are measured on the fully
    expanded landing URL (browser identity). When the chain cannot be
    completed the slots degrade to the missing-value sentinel, except
    url_length which falls back to the posted URL itself.
    """
    posted = str(normalize_url(url))
    try:
        trace = trace_redirects(fetcher, url)
    except TraceError:
        trace = None
    if trace is not None and trace.failed:
        trace = None

    if trace is None:
        return {
            "url_length": float(len(posted)),
            "num_dots": SENTINEL,
            "num_subdomains": SENTINEL,
            "num_redirects": SENTINEL,
            "avg_hop_levenshtein": SENTINEL,
            "conditional_redirect": SENTINEL,
        }

    landing = trace.landing_url
    host = normalize_url(landing).host
    return {
        "url_length": float(len(landing)),
        "num_dots": float(landing.count(".")),
        "num_subdomains": float(psl.subdomain_count(host)),
        "num_redirects": float(trace.num_redirects),
        "avg_hop_levenshtein": hop_levenshtein(list(trace.hops)),
        "conditional_redirect": float(detect_conditional_redirect(fetcher, url, psl)),
    }
