"""Tweet-content and account-graph feature slots.

Hashtags and mentions follow the usual word-character rule; topic matching
against the trending set is case-insensitive over half-open time windows.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import AccountProfile, Tweet
from .timefmt import parse_timestamp

SENTINEL = -1.0
SECONDS_PER_DAY = 86400

HASHTAG_RE = re.compile(r"#([A-Za-z0-9_]+)")
MENTION_RE = re.compile(r"@([A-Za-z0-9_]+)")


def extract_hashtags(text: str) -> list[str]:
    return [m.group(1).lower() for m in HASHTAG_RE.finditer(text)]


def extract_mentions(text: str) -> list[str]:
    return [m.group(1).lower() for m in MENTION_RE.finditer(text)]


def first_hashtag_position(text: str) -> int:
    """Character offset of the first hashtag's '#', or -1 when there is none."""
    m = HASHTAG_RE.search(text)
    return m.start() if m else -1


@dataclass(frozen=True)
class TrendingWindow:
    topic: str
    start: int
    end: int


class TrendingContext:
    """The set of trending topics, each valid over [start, end)."""

    def __init__(self, windows: list[TrendingWindow]):
        self._by_topic: dict[str, list[TrendingWindow]] = {}
        for w in windows:
            self._by_topic.setdefault(w.topic.lower(), []).append(w)

    @classmethod
    def empty(cls) -> "TrendingContext":
        return cls([])

    @classmethod
    def from_file(cls, path: str | Path) -> "TrendingContext":
        items = json.loads(Path(path).read_text(encoding="utf-8"))
        windows = [
            TrendingWindow(
                topic=str(item["topic"]),
                start=parse_timestamp(item["window_start"]),
                end=parse_timestamp(item["window_end"]),
            )
            for item in items
        ]
        return cls(windows)

    def is_trending(self, topic: str, at: int) -> bool:
        return any(w.start <= at < w.end for w in self._by_topic.get(topic.lower(), ()))


def extract_tweet_features(tweet: Tweet, trends: TrendingContext) -> dict[str, float]:
    """The six content slots, all computable without any network access."""
    tags = extract_hashtags(tweet.text)
    return {
        "num_hashtags": float(len(tags)),
        "num_mentions": float(len(extract_mentions(tweet.text))),
        "num_trending_hashtags": float(
            sum(1 for tag in tags if trends.is_trending(tag, tweet.created_at))
        ),
        "retweet_count": float(tweet.retweet_count),
        "tweet_length": float(len(tweet.text)),
        "first_hashtag_position": float(first_hashtag_position(tweet.text)),
    }


def extract_network_features(author: AccountProfile, at: int) -> dict[str, float]:
    """The seven account slots as of time `at`.

    A protected account exposes none of them, so every slot carries the
    sentinel.
    """
    names = (
        "followers_count",
        "followees_count",
        "follower_followee_ratio",
        "is_listed",
        "account_age_days",
        "has_description",
        "statuses_count",
    )
    if author.protected:
        return {name: SENTINEL for name in names}
    return {
        "followers_count": float(author.followers_count),
        "followees_count": float(author.followees_count),
        "follower_followee_ratio": author.followers_count / max(author.followees_count, 1),
        "is_listed": 1.0 if author.listed_count > 0 else 0.0,
        "account_age_days": max(0.0, (at - author.created_at) / SECONDS_PER_DAY),
        "has_description": 1.0 if author.has_description else 0.0,
        "statuses_count": float(author.statuses_count),
    }
