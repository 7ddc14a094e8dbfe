"""Feature assembly: one tweet in, one 22-slot vector out.

Composes the four per-group extractors (URL expansion, domain
registration, tweet text, account network) and provides corpus-level
extraction with a frequency-coded registrar table, plus the vectors-file
format that the training and evaluation commands exchange.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import LabeledCorpus, Tweet, tweet_from_json
from .ml import FEATURE_NAMES, GROUP_BOUNDS, GROUP_ORDER, SENTINEL
from .socialfeatures import TrendingContext, extract_network_features, extract_tweet_features
from .urlanalysis import (
    PublicSuffixList,
    TraceError,
    UrlParseError,
    extract_url_features,
    normalize_url,
    trace_redirects,
)
from .whois import (
    WhoisCache,
    WhoisError,
    WhoisRecord,
    build_registrar_table,
    extract_whois_features,
    fetch_whois_record,
)

VECTORS_FORMAT_VERSION = 1

# Simulated per-group network cost for the bundled fixture set, so that
# fixture-backed timing behaves like a live deployment in miniature.
DEMO_GROUP_DELAYS_S = {"url": 0.08, "whois": 0.06, "tweet": 0.008, "network": 0.008}


class PipelineError(Exception):
    pass


class VectorFormatError(PipelineError):
    pass


class FeatureExtractor:
    """Turns tweets into feature vectors, one group at a time.

    The fetcher and WHOIS transport may be live or fixture-backed; the
    registrar table starts empty and is replaced once a corpus pass has
    counted registrar frequencies. ``group_delays_s`` adds a fixed cost
    per group call, used by fixture setups to imitate network latency.
    """

    def __init__(
        self,
        fetcher,
        whois_transport,
        trends: TrendingContext,
        *,
        psl: PublicSuffixList | None = None,
        registrar_table: dict[str, int] | None = None,
        whois_cache: WhoisCache | None = None,
        group_delays_s: dict[str, float] | None = None,
        clock=time.time,
    ):
        self.fetcher = fetcher
        self.whois_transport = whois_transport
        self.trends = trends
        self.psl = psl if psl is not None else PublicSuffixList.bundled()
        self.registrar_table = dict(registrar_table or {})
        self.whois_cache = whois_cache if whois_cache is not None else WhoisCache()
        self.group_delays_s = dict(group_delays_s or {})
        self._clock = clock

    def landing_domain(self, tweet: Tweet) -> str | None:
        """Registrable domain of the first URL's landing page, falling back
        to the posted URL's domain when the chain cannot be completed."""
        url = tweet.urls[0]
        try:
            host = normalize_url(url).host
        except UrlParseError:
            return None
        try:
            trace = trace_redirects(self.fetcher, url)
            if not trace.failed:
                host = normalize_url(trace.landing_url).host
        except (TraceError, UrlParseError):
            pass
        return self.psl.registrable_domain(host)

    def whois_record(self, tweet: Tweet) -> WhoisRecord | None:
        domain = self.landing_domain(tweet)
        if domain is None:
            return None
        try:
            return self.whois_cache.get_or_fetch(
                domain,
                lambda d: fetch_whois_record(self.whois_transport, d),
                now=self._clock(),
            )
        except (WhoisError, OSError):
            return None

    def extract_group(self, group: str, tweet: Tweet) -> dict[str, float]:
        delay = self.group_delays_s.get(group, 0.0)
        if delay > 0.0:
            time.sleep(delay)
        if group == "url":
            try:
                return extract_url_features(self.fetcher, self.psl, tweet.urls[0])
            except UrlParseError:
                lo, hi = GROUP_BOUNDS["url"]
                return {name: SENTINEL for name in FEATURE_NAMES[lo:hi]}
        if group == "whois":
            record = self.whois_record(tweet)
            return extract_whois_features(
                record, tweet.created_at, tweet.author.created_at, self.registrar_table
            )
        if group == "tweet":
            return extract_tweet_features(tweet, self.trends)
        if group == "network":
            return extract_network_features(tweet.author, tweet.created_at)
        raise PipelineError(f"unknown feature group {group!r}")

    def extract(self, tweet: Tweet) -> list[float]:
        values: dict[str, float] = {}
        for group in GROUP_ORDER:
            values.update(self.extract_group(group, tweet))
        return [float(values[name]) for name in FEATURE_NAMES]


def fixture_extractor(
    fixtures_dir: str | Path,
    *,
    trends_path: str | Path | None = None,
    group_delays_s: dict[str, float] | None = None,
) -> FeatureExtractor:
    """Wire an extractor to the on-disk fixture layout:

    redirects.json for HTTP fetches, whois/ for registration lookups,
    trends.json (optional here, or an explicit path) for topic windows.
    """
    from .urlanalysis import FixtureUrlFetcher
    from .whois import DirectoryWhoisTransport

    root = Path(fixtures_dir)
    redirects = root / "redirects.json"
    whois_dir = root / "whois"
    if not redirects.is_file():
        raise PipelineError(f"fixture set missing redirects.json under {root}")
    if not whois_dir.is_dir():
        raise PipelineError(f"fixture set missing whois/ under {root}")
    if trends_path is None:
        bundled = root / "trends.json"
        trends_path = bundled if bundled.is_file() else None
    trends = TrendingContext.from_file(trends_path) if trends_path else TrendingContext.empty()
    return FeatureExtractor(
        FixtureUrlFetcher.from_file(redirects),
        DirectoryWhoisTransport(whois_dir),
        trends,
        group_delays_s=group_delays_s,
    )


@dataclass(frozen=True)
class VectorEntry:
    tweet_id: str
    label: str | None  # "phishing" | "safe" | None
    values: tuple[float, ...]


@dataclass(frozen=True)
class VectorSet:
    feature_names: tuple[str, ...]
    registrar_freq_table: dict[str, int]
    availability: dict[str, float]
    entries: tuple[VectorEntry, ...]

    def __post_init__(self):
        width = len(self.feature_names)
        for entry in self.entries:
            if len(entry.values) != width:
                raise VectorFormatError(
                    f"entry {entry.tweet_id}: {len(entry.values)} values for {width} features"
                )

    def matrix(self) -> np.ndarray:
        return np.array([e.values for e in self.entries], dtype=float)

    def labeled_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, y) over labeled entries only, y=1 for phishing."""
        labeled = [e for e in self.entries if e.label is not None]
        if not labeled:
            raise PipelineError("vector set has no labeled entries")
        X = np.array([e.values for e in labeled], dtype=float)
        y = np.array([1 if e.label == "phishing" else 0 for e in labeled], dtype=np.int64)
        return X, y

    @property
    def n_labeled(self) -> int:
        return sum(1 for e in self.entries if e.label is not None)


def availability_from_matrix(X: np.ndarray) -> dict[str, float]:
    """Per group, the fraction of rows where extraction produced anything
    besides sentinels."""
    out = {}
    n = max(len(X), 1)
    for group in GROUP_ORDER:
        lo, hi = GROUP_BOUNDS[group]
        resolved = (X[:, lo:hi] != SENTINEL).any(axis=1).sum() if len(X) else 0
        out[group] = round(float(resolved) / n, 6)
    return out


def extract_corpus(corpus: LabeledCorpus, extractor: FeatureExtractor) -> VectorSet:
    """Two passes: count registrar names to freeze the frequency table,
    then extract every entry. The WHOIS cache keeps the second pass from
    repeating lookups."""
    names = []
    for tweet in corpus.tweets():
        record = extractor.whois_record(tweet)
        if record is not None and record.registrar:
            names.append(record.registrar)
    extractor.registrar_table = build_registrar_table(names)

    entries = []
    for entry in corpus.entries:
        values = extractor.extract(entry.tweet)
        label = entry.label.value.value if entry.label is not None else None
        entries.append(VectorEntry(entry.tweet.id, label, tuple(values)))
    X = np.array([e.values for e in entries], dtype=float) if entries else np.zeros((0, 22))
    return VectorSet(
        feature_names=FEATURE_NAMES,
        registrar_freq_table=dict(extractor.registrar_table),
        availability=availability_from_matrix(X),
        entries=tuple(entries),
    )


def synthetic_vector_set(n: int, separability: float, rng_seed: int) -> VectorSet:
    from .evaluation import generate_synthetic_vectors

    X, y = generate_synthetic_vectors(n, separability, rng_seed)
    entries = tuple(
        VectorEntry(
            tweet_id=f"synth-{i:05d}",
            label="phishing" if y[i] == 1 else "safe",
            values=tuple(float(v) for v in X[i]),
        )
        for i in range(n)
    )
    return VectorSet(
        feature_names=FEATURE_NAMES,
        registrar_freq_table={},
        availability=availability_from_matrix(X),
        entries=entries,
    )


def vectors_to_json(vs: VectorSet) -> dict:
    return {
        "format_version": VECTORS_FORMAT_VERSION,
        "feature_names": list(vs.feature_names),
        "registrar_freq_table": dict(vs.registrar_freq_table),
        "availability": dict(vs.availability),
        "entries": [
            {"tweet_id": e.tweet_id, "label": e.label, "values": list(e.values)}
            for e in vs.entries
        ],
    }


def vectors_from_json(doc: dict) -> VectorSet:
    if not isinstance(doc, dict):
        raise VectorFormatError("vectors document is not a JSON object")
    version = doc.get("format_version")
    if version != VECTORS_FORMAT_VERSION:
        raise VectorFormatError(
            f"unsupported vectors format version {version!r}, expected {VECTORS_FORMAT_VERSION}"
        )
    try:
        names = tuple(str(n) for n in doc["feature_names"])
        entries = tuple(
            VectorEntry(
                tweet_id=str(e["tweet_id"]),
                label=None if e.get("label") is None else str(e["label"]),
                values=tuple(float(v) for v in e["values"]),
            )
            for e in doc["entries"]
        )
        table = {str(k): int(v) for k, v in doc.get("registrar_freq_table", {}).items()}
        availability = {str(k): float(v) for k, v in doc.get("availability", {}).items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise VectorFormatError(f"malformed vectors document: {exc}") from exc
    for entry in entries:
        if entry.label is not None and entry.label not in ("phishing", "safe"):
            raise VectorFormatError(f"entry {entry.tweet_id}: unknown label {entry.label!r}")
    return VectorSet(names, table, availability, entries)


def save_vectors(vs: VectorSet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(vectors_to_json(vs), indent=1) + "\n", encoding="utf-8")


def load_vectors(path: str | Path) -> VectorSet:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise VectorFormatError(f"cannot read vectors file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise VectorFormatError(f"vectors file is not valid JSON: {exc}") from exc
    return vectors_from_json(doc)


class JsonlTweetProvider:
    """Tweet lookup backed by a one-record-per-line JSON fixture store."""

    def __init__(self, path: str | Path):
        self._tweets: dict[str, Tweet] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            tweet = tweet_from_json(json.loads(line))
            self._tweets[tweet.id] = tweet

    def get(self, tweet_id: str) -> Tweet | None:
        return self._tweets.get(tweet_id)

    def __len__(self) -> int:
        return len(self._tweets)
