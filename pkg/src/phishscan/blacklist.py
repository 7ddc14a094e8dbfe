"""Time-aware blacklist stores and delayed-labeling comparisons.

Stores are tab-separated files of (status, pattern, added_at) rows. Every
lookup is made "as of" a moment in time and only sees entries added at or
before it, which is what lets us replay how a feed filled in after the fact.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .corpus import Label, LabeledCorpus, LabelSource, LabelValue
from .timefmt import parse_timestamp
from .urlanalysis import UrlParseError, normalize_url


class BlacklistError(Exception):
    pass


class BlacklistStatus(Enum):
    PHISHING = "phishing"
    MALWARE = "malware"
    SAFE = "safe"

    @property
    def is_bad(self) -> bool:
        return self is not BlacklistStatus.SAFE


@dataclass(frozen=True)
class BlacklistEntry:
    status: BlacklistStatus
    pattern: str  # full URL (has a scheme) or bare registrable domain
    added_at: int

    @property
    def is_url_pattern(self) -> bool:
        return "://" in self.pattern


@dataclass(frozen=True)
class BlacklistVerdict:
    status: BlacklistStatus
    as_of: int  # the lookup time, not the entry time
    pattern: str
    source: str


def _parse_line(line: str, lineno: int, path) -> BlacklistEntry:
    fields = line.split("\t")
    if len(fields) != 3:
        raise BlacklistError(f"{path}:{lineno}: expected 3 tab-separated fields")
    status_raw, pattern, added_raw = (f.strip() for f in fields)
    try:
        status = BlacklistStatus(status_raw.lower())
    except ValueError:
        raise BlacklistError(f"{path}:{lineno}: unknown status {status_raw!r}") from None
    if not pattern:
        raise BlacklistError(f"{path}:{lineno}: empty pattern")
    try:
        added_at = parse_timestamp(added_raw)
    except ValueError as exc:
        raise BlacklistError(f"{path}:{lineno}: bad timestamp: {exc}") from None
    if "://" in pattern:
        pattern = str(normalize_url(pattern))
    else:
        pattern = pattern.lower().rstrip(".")
    return BlacklistEntry(status=status, pattern=pattern, added_at=added_at)


class BlacklistStore:
    def __init__(self, entries: list[BlacklistEntry], name: str = "blacklist"):
        self.entries = list(entries)
        self.name = name

    @classmethod
    def from_file(cls, path: str | Path) -> "BlacklistStore":
        path = Path(path)
        entries = []
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            entries.append(_parse_line(line, lineno, path))
        return cls(entries, name=path.stem)

    def lookup(self, url: str, at: int) -> BlacklistVerdict | None:
        """Best verdict among entries visible at time `at`, or None.

        URL patterns beat domain patterns; among equals a bad status beats
        safe, then the earliest-added entry wins. Domain patterns match the
        host itself and any subdomain of it.
        """
        try:
            normalized = normalize_url(url)
        except UrlParseError:
            return None
        url_key = str(normalized)
        host = normalized.host

        best: BlacklistEntry | None = None
        best_rank: tuple | None = None
        for entry in self.entries:
            if entry.added_at > at:
                continue
            if entry.is_url_pattern:
                if entry.pattern != url_key:
                    continue
                exactness = 0
            else:
                if host != entry.pattern and not host.endswith("." + entry.pattern):
                    continue
                exactness = 1
            rank = (exactness, 0 if entry.status.is_bad else 1, entry.added_at)
            if best_rank is None or rank < best_rank:
                best, best_rank = entry, rank
        if best is None:
            return None
        return BlacklistVerdict(status=best.status, as_of=at, pattern=best.pattern, source=self.name)


def lookup_all(stores, url: str, at: int) -> BlacklistVerdict | None:
    """Combine lookups across stores: any bad verdict wins over safe."""
    verdicts = [v for v in (store.lookup(url, at) for store in stores) if v is not None]
    if not verdicts:
        return None
    bad = [v for v in verdicts if v.status.is_bad]
    return bad[0] if bad else verdicts[0]


def url_is_bad(stores, url: str, at: int) -> bool:
    verdict = lookup_all(stores, url, at)
    return verdict is not None and verdict.status.is_bad


def delayed_relabel(corpus: LabeledCorpus, stores, delay_s: int) -> tuple[LabeledCorpus, int]:
    """Re-check every tweet's URLs delay_s after posting.

    Entries that looked safe at posting time but whose URLs have since been
    blacklisted flip to phishing; the flip count is returned. A phishing
    label never downgrades to safe.
    """
    entries = []
    flips = 0
    for entry in corpus.entries:
        tweet = entry.tweet
        t0 = tweet.created_at
        baseline = entry.label
        if baseline is None:
            value = (
                LabelValue.PHISHING
                if any(url_is_bad(stores, u, t0) for u in tweet.urls)
                else LabelValue.SAFE
            )
            baseline = Label(value=value, source=LabelSource.BLACKLIST, labeled_at=t0)

        later = t0 + delay_s
        bad_later = any(url_is_bad(stores, u, later) for u in tweet.urls)
        if baseline.value is LabelValue.SAFE and bad_later:
            flips += 1
            entries.append(
                replace(
                    entry,
                    label=Label(
                        value=LabelValue.PHISHING,
                        source=LabelSource.BLACKLIST,
                        labeled_at=later,
                    ),
                )
            )
        else:
            entries.append(replace(entry, label=baseline))
    return LabeledCorpus(entries=tuple(entries), schema_version=corpus.schema_version), flips


def zero_hour_catch_rate(model, observations, stores, t0: int, delay_s: int) -> float:
    """Fraction of eventually-blacklisted URLs the model already flags at t0.

    observations: (urls, feature_vector) pairs, one per tweet. A tweet
    counts toward the denominator when none of its URLs is blacklisted at
    t0 but at least one is at t0 + delay_s; it counts toward the numerator
    when the model classifies its vector as phishing.
    """
    caught = 0
    eventual = 0
    for urls, vector in observations:
        if any(url_is_bad(stores, u, t0) for u in urls):
            continue
        if not any(url_is_bad(stores, u, t0 + delay_s) for u in urls):
            continue
        eventual += 1
        if model.predict(vector) == 1:
            caught += 1
    if eventual == 0:
        raise BlacklistError("no URL became blacklisted within the delay window")
    return caught / eventual
