"""Tweet data model, JSONL ingestion, and labeled-dataset persistence.

The pipeline only admits tweets that carry at least one URL and at most 140
characters of text. Corpora are immutable after construction and persist to
a single JSON document.
"""

from __future__ import annotations

import json
import logging
import unicodedata
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .timefmt import format_timestamp, parse_timestamp

log = logging.getLogger(__name__)

CORPUS_SCHEMA_VERSION = 1
MAX_TWEET_CHARS = 140


class CorpusError(Exception):
    pass


class InvalidTweetError(CorpusError):
    """A record violates a tweet or profile invariant."""


class IngestError(CorpusError):
    """The input file cannot be read at all."""


class CorpusVersionError(CorpusError):
    def __init__(self, found, expected):
        super().__init__(f"corpus schema_version {found}, expected {expected}")
        self.found = found
        self.expected = expected


class LabelValue(Enum):
    PHISHING = "phishing"
    SAFE = "safe"


class LabelSource(Enum):
    BLACKLIST = "blacklist"
    TWITTER_WARNING = "twitter_warning"
    MANUAL = "manual"
    CLASSIFIER = "classifier"


@dataclass(frozen=True)
class AccountProfile:
    user_id: str
    created_at: int  # epoch seconds UTC
    followers_count: int
    followees_count: int
    listed_count: int
    has_description: bool
    statuses_count: int
    protected: bool

    def __post_init__(self):
        if not self.user_id:
            raise InvalidTweetError("profile user_id is empty")
        for name in ("followers_count", "followees_count", "listed_count", "statuses_count"):
            if getattr(self, name) < 0:
                raise InvalidTweetError(f"profile {name} is negative")


@dataclass(frozen=True)
class Tweet:
    id: str
    text: str
    created_at: int  # epoch seconds UTC
    urls: tuple[str, ...]
    retweet_count: int
    author: AccountProfile

    def __post_init__(self):
        if not self.id:
            raise InvalidTweetError("tweet id is empty")
        if not self.text:
            raise InvalidTweetError(f"tweet {self.id}: empty text")
        if len(self.text) > MAX_TWEET_CHARS:
            raise InvalidTweetError(
                f"tweet {self.id}: text is {len(self.text)} chars, limit {MAX_TWEET_CHARS}"
            )
        if not self.urls:
            raise InvalidTweetError(f"tweet {self.id}: no URLs")
        if self.retweet_count < 0:
            raise InvalidTweetError(f"tweet {self.id}: negative retweet_count")
        if self.author.created_at > self.created_at:
            raise InvalidTweetError(f"tweet {self.id}: author account newer than the tweet")


@dataclass(frozen=True)
class Label:
    value: LabelValue
    source: LabelSource
    labeled_at: int

    def to_json(self) -> dict:
        return {
            "value": self.value.value,
            "source": self.source.value,
            "labeled_at": format_timestamp(self.labeled_at),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Label":
        return cls(
            value=LabelValue(obj["value"]),
            source=LabelSource(obj["source"]),
            labeled_at=parse_timestamp(obj["labeled_at"]),
        )


@dataclass(frozen=True)
class CorpusEntry:
    tweet: Tweet
    label: Label | None = None


@dataclass(frozen=True)
class LabeledCorpus:
    entries: tuple[CorpusEntry, ...]
    schema_version: int = CORPUS_SCHEMA_VERSION

    def __post_init__(self):
        seen = set()
        for entry in self.entries:
            if entry.tweet.id in seen:
                raise CorpusError(f"duplicate tweet id {entry.tweet.id}")
            seen.add(entry.tweet.id)
            if entry.label is not None and entry.label.labeled_at < entry.tweet.created_at:
                raise CorpusError(f"tweet {entry.tweet.id}: labeled before it was posted")

    def __len__(self):
        return len(self.entries)

    def tweets(self) -> list[Tweet]:
        return [entry.tweet for entry in self.entries]


def _has_description(user_obj: dict) -> bool:
    if "has_description" in user_obj:
        return bool(user_obj["has_description"])
    description = user_obj.get("description")
    return isinstance(description, str) and bool(description.strip())


def tweet_from_json(obj: dict) -> Tweet:
    """Build a Tweet from the JSONL record schema. Unknown keys are ignored.

    Raises InvalidTweetError when required fields are missing, malformed, or
    violate an invariant.
    """
    try:
        user = obj["user"]
        author = AccountProfile(
            user_id=str(user["id"]),
            created_at=parse_timestamp(user["created_at"]),
            followers_count=int(user["followers_count"]),
            followees_count=int(user.get("friends_count", user.get("followees_count", 0))),
            listed_count=int(user.get("listed_count", 0)),
            has_description=_has_description(user),
            statuses_count=int(user.get("statuses_count", 0)),
            protected=bool(user.get("protected", False)),
        )
        return Tweet(
            id=str(obj["id"]),
            text=str(obj["text"]),
            created_at=parse_timestamp(obj["created_at"]),
            urls=tuple(str(u) for u in obj.get("urls", [])),
            retweet_count=int(obj.get("retweet_count", 0)),
            author=author,
        )
    except InvalidTweetError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidTweetError(f"malformed tweet record: {exc}") from exc


def tweet_to_json(tweet: Tweet) -> dict:
    return {
        "id": tweet.id,
        "text": tweet.text,
        "created_at": format_timestamp(tweet.created_at),
        "urls": list(tweet.urls),
        "retweet_count": tweet.retweet_count,
        "user": {
            "id": tweet.author.user_id,
            "created_at": format_timestamp(tweet.author.created_at),
            "followers_count": tweet.author.followers_count,
            "friends_count": tweet.author.followees_count,
            "listed_count": tweet.author.listed_count,
            "has_description": tweet.author.has_description,
            "statuses_count": tweet.author.statuses_count,
            "protected": tweet.author.protected,
        },
    }


@dataclass
class IngestResult:
    corpus: LabeledCorpus
    admitted: int = 0
    skipped_no_url: int = 0
    skipped_too_long: int = 0
    skipped_invalid: int = 0
    skipped_duplicate_id: int = 0
    deduped_text: int = 0

    @property
    def skipped(self) -> int:
        return (
            self.skipped_no_url
            + self.skipped_too_long
            + self.skipped_invalid
            + self.skipped_duplicate_id
        )


def ingest_stream(path: str | Path, dedupe_text: bool = False) -> IngestResult:
    """Read one-tweet-per-line JSON records into an unlabeled corpus.

    Records without URLs or over 140 characters are skipped and counted, as
    are malformed lines (each logged with its line number). With dedupe_text,
    exact duplicate texts (after NFC normalization) keep the earliest record.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc

    result = IngestResult(corpus=LabeledCorpus(entries=()))
    kept: list[Tweet] = []
    ids: set[str] = set()
    by_text: dict[str, int] = {}  # NFC text -> index into kept

    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            tweet = tweet_from_json(obj)
        except json.JSONDecodeError as exc:
            log.warning("%s:%d: invalid JSON: %s", path, lineno, exc)
            result.skipped_invalid += 1
            continue
        except InvalidTweetError as exc:
            message = str(exc)
            if "no URLs" in message:
                result.skipped_no_url += 1
            elif "limit" in message:
                result.skipped_too_long += 1
            else:
                log.warning("%s:%d: %s", path, lineno, exc)
                result.skipped_invalid += 1
            continue

        if tweet.id in ids:
            result.skipped_duplicate_id += 1
            continue

        if dedupe_text:
            key = unicodedata.normalize("NFC", tweet.text)
            if key in by_text:
                idx = by_text[key]
                if tweet.created_at < kept[idx].created_at:
                    ids.discard(kept[idx].id)
                    ids.add(tweet.id)
                    kept[idx] = tweet
                result.deduped_text += 1
                continue
            by_text[key] = len(kept)

        ids.add(tweet.id)
        kept.append(tweet)

    result.admitted = len(kept)
    result.corpus = LabeledCorpus(entries=tuple(CorpusEntry(tweet=t) for t in kept))
    return result


def apply_labels(corpus: LabeledCorpus, verdicts) -> LabeledCorpus:
    """Label every entry from a list of (url, BlacklistVerdict) pairs.

    A tweet is phishing iff any of its URLs carries a phishing or malware
    verdict; everything else is safe (a missing verdict counts as safe).
    URLs are compared in normalized form. Idempotent for a fixed verdict set.
    """
    from .urlanalysis import UrlParseError, normalize_url

    by_url: dict[str, list] = {}
    for url, verdict in verdicts:
        try:
            key = str(normalize_url(url))
        except UrlParseError:
            key = url
        by_url.setdefault(key, []).append(verdict)

    entries = []
    for entry in corpus.entries:
        tweet = entry.tweet
        matched = []
        for raw in tweet.urls:
            try:
                key = str(normalize_url(raw))
            except UrlParseError:
                key = raw
            matched.extend(by_url.get(key, ()))

        bad = [v for v in matched if v.status.value in ("phishing", "malware")]
        if bad:
            value = LabelValue.PHISHING
            stamp = max(v.as_of for v in bad)
        else:
            value = LabelValue.SAFE
            stamp = max((v.as_of for v in matched), default=tweet.created_at)
        label = Label(
            value=value,
            source=LabelSource.BLACKLIST,
            labeled_at=max(stamp, tweet.created_at),
        )
        entries.append(replace(entry, label=label))
    return LabeledCorpus(entries=tuple(entries), schema_version=corpus.schema_version)


def persist(corpus: LabeledCorpus, path: str | Path) -> None:
    """Write a corpus to a JSON file; load() restores it exactly."""
    doc = {
        "schema_version": corpus.schema_version,
        "entries": [
            {
                "tweet": tweet_to_json(entry.tweet),
                "label": entry.label.to_json() if entry.label else None,
            }
            for entry in corpus.entries
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load(path: str | Path) -> LabeledCorpus:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path} is not valid JSON: {exc}") from exc

    version = doc.get("schema_version")
    if version != CORPUS_SCHEMA_VERSION:
        raise CorpusVersionError(found=version, expected=CORPUS_SCHEMA_VERSION)

    entries = []
    for item in doc["entries"]:
        tweet = tweet_from_json(item["tweet"])
        label = Label.from_json(item["label"]) if item.get("label") else None
        entries.append(CorpusEntry(tweet=tweet, label=label))
    return LabeledCorpus(entries=tuple(entries), schema_version=version)
