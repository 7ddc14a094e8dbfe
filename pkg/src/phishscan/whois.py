"""Domain registration lookups and the registration-derived features.

Registration data comes over the plain TCP port-43 protocol with referral
following, or from a directory of canned responses when running offline.
Responses are free-form text, so parsing is tolerant by construction: it
scans for known key synonyms and never raises.
"""

from __future__ import annotations

import re
import socket
import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .timefmt import parse_timestamp

SENTINEL = -1.0

IANA_ROOT = "whois.iana.org"
SECONDS_PER_DAY = 86400


class WhoisError(Exception):
    pass


@dataclass(frozen=True)
class WhoisRecord:
    domain: str
    created: int | None = None
    updated: int | None = None
    expires: int | None = None
    registrar: str | None = None


class TcpWhoisTransport:
    """Sends `domain\\r\\n` over TCP port 43 and reads until EOF."""

    def __init__(self, timeout: float = 3.0, port: int = 43):
        self._timeout = timeout
        self._port = port

    def query(self, server: str, domain: str) -> str:
        try:
            with socket.create_connection((server, self._port), timeout=self._timeout) as sock:
                sock.sendall(domain.encode("ascii") + b"\r\n")
                chunks = []
                while True:
                    chunk = sock.recv(4096)
                    if not chunk:
                        break
                    chunks.append(chunk)
        except OSError as exc:
            raise WhoisError(f"query to {server} for {domain} failed: {exc}") from exc
        return b"".join(chunks).decode("utf-8", errors="replace")


class DirectoryWhoisTransport:
    """Serves responses from a directory of text files.

    `<server>__<domain>.txt` answers a specific server's view when present,
    otherwise `<domain>.txt` answers for every server. Missing files behave
    like network failures.
    """

    def __init__(self, directory: str | Path):
        self._dir = Path(directory)

    def query(self, server: str, domain: str) -> str:
        for name in (f"{server}__{domain}.txt", f"{domain}.txt"):
            path = self._dir / name
            if path.is_file():
                return path.read_text(encoding="utf-8")
        raise WhoisError(f"no response on file for {domain} (server {server})")


_REFERRAL_RE = re.compile(r"^\s*(?:refer|whois(?: server)?|registrar whois server)\s*:\s*(\S+)", re.IGNORECASE)


def query_whois(transport, domain: str, root_server: str = IANA_ROOT, max_referrals: int = 2) -> str:
    """Query starting at the root directory server, following at most
    max_referrals referrals. A referral that fails to answer falls back to
    the deepest response already in hand."""
    domain = domain.lower().rstrip(".")
    server = root_server
    seen = {server}
    raw = transport.query(server, domain)
    for _ in range(max_referrals):
        match = None
        for line in raw.splitlines():
            match = _REFERRAL_RE.match(line)
            if match:
                break
        if not match:
            break
        nxt = match.group(1).strip().lower().rstrip("/")
        nxt = re.sub(r"^r?whois://", "", nxt).split(":")[0]
        if not nxt or nxt in seen:
            break
        seen.add(nxt)
        try:
            raw = transport.query(nxt, domain)
        except WhoisError:
            break  # keep the best answer we have
    if not raw.strip():
        raise WhoisError(f"empty response for {domain}")
    return raw


_CREATED_KEYS = (
    "creation date",
    "created",
    "created on",
    "registered on",
    "registered",
    "registration date",
    "domain registration date",
)
_UPDATED_KEYS = ("updated date", "last updated on", "last updated", "changed", "modified")
_EXPIRES_KEYS = (
    "registry expiry date",
    "registrar registration expiration date",
    "expiration date",
    "expiry date",
    "expires on",
    "expires",
    "paid-till",
)
_REGISTRAR_KEYS = ("registrar", "sponsoring registrar")

_MONTHS = {
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "may": 5, "jun": 6,
    "jul": 7, "aug": 8, "sep": 9, "oct": 10, "nov": 11, "dec": 12,
}
_DMY_RE = re.compile(r"^(\d{1,2})-([A-Za-z]{3})-(\d{4})$")
_DATE_RE = re.compile(r"^(\d{4})[-./](\d{2})[-./](\d{2})")


def _parse_whois_date(value: str) -> int | None:
    value = value.strip().rstrip(".")
    if not value:
        return None
    try:
        return parse_timestamp(value)
    except ValueError:
        pass
    m = _DMY_RE.match(value)
    if m:
        day, mon, year = m.groups()
        month = _MONTHS.get(mon.lower())
        if month is None:
            return None
        try:
            return parse_timestamp(f"{year}-{month:02d}-{int(day):02d}T00:00:00Z")
        except ValueError:
            return None
    m = _DATE_RE.match(value)
    if m:
        year, month, day = m.groups()
        try:
            return parse_timestamp(f"{year}-{month}-{day}T00:00:00Z")
        except ValueError:
            return None
    return None


def parse_whois(raw: str, domain: str = "") -> WhoisRecord:
    """Pull dates and the registrar out of a raw response.

    The first line matching each field's synonym list wins. Unparseable
    values are treated as absent; this function never raises.
    """
    created = updated = expires = None
    registrar = None
    for line in raw.splitlines():
        if ":" not in line:
            continue
        key, _, value = line.partition(":")
        key = key.strip().lower()
        value = value.strip()
        if not value:
            continue
        if created is None and key in _CREATED_KEYS:
            created = _parse_whois_date(value)
        elif updated is None and key in _UPDATED_KEYS:
            updated = _parse_whois_date(value)
        elif expires is None and key in _EXPIRES_KEYS:
            expires = _parse_whois_date(value)
        elif registrar is None and key in _REGISTRAR_KEYS:
            registrar = value
    return WhoisRecord(
        domain=domain, created=created, updated=updated, expires=expires, registrar=registrar
    )


def fetch_whois_record(transport, domain: str) -> WhoisRecord:
    raw = query_whois(transport, domain)
    return parse_whois(raw, domain=domain)


class WhoisCache:
    """In-memory per-domain cache with a freshness window."""

    def __init__(self, ttl_s: int = 24 * 3600):
        self._ttl = ttl_s
        self._lock = threading.Lock()
        self._items: dict[str, tuple[float, WhoisRecord]] = {}

    def get_or_fetch(self, domain: str, fetch, now) -> WhoisRecord:
        domain = domain.lower()
        with self._lock:
            hit = self._items.get(domain)
            if hit is not None and now - hit[0] < self._ttl:
                return hit[1]
        record = fetch(domain)
        with self._lock:
            self._items[domain] = (now, record)
        return record


def normalize_registrar(name: str) -> str:
    return " ".join(name.split()).casefold().rstrip(".,")


def build_registrar_table(registrars) -> dict[str, int]:
    """Code registrar names by corpus frequency: the most common name gets
    code 1, the next 2, and so on (name order breaks count ties). Names not
    in the table code to 0 at lookup time."""
    counts = Counter(normalize_registrar(r) for r in registrars if r)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return {name: code for code, (name, _) in enumerate(ordered, start=1)}


def registrar_code(name: str | None, table: dict[str, int]) -> float:
    if not name:
        return SENTINEL
    return float(table.get(normalize_registrar(name), 0))


def extract_whois_features(
    record: WhoisRecord | None,
    tweet_created_at: int,
    account_created_at: int,
    registrar_table: dict[str, int],
) -> dict[str, float]:
    """The three registration-derived slots.

    ownership_period_days spans registration to expiry, falling back to
    registration-to-tweet when no expiry is on record. Slots whose inputs
    are missing carry the sentinel.
    """
    if record is None:
        return {
            "registrar_code": SENTINEL,
            "ownership_period_days": SENTINEL,
            "domain_to_account_days": SENTINEL,
        }

    if record.created is not None:
        end = record.expires if record.expires is not None else tweet_created_at
        ownership = max(0.0, (end - record.created) / SECONDS_PER_DAY)
        to_account = max(0.0, (account_created_at - record.created) / SECONDS_PER_DAY)
    else:
        ownership = SENTINEL
        to_account = SENTINEL

    return {
        "registrar_code": registrar_code(record.registrar, registrar_table),
        "ownership_period_days": ownership,
        "domain_to_account_days": to_account,
    }
