"""Timestamp and duration parsing.

Timestamps are ISO-8601 UTC strings in files and integer epoch seconds in
memory; naive inputs are taken as UTC.
"""

from __future__ import annotations

import re
from datetime import datetime, timezone

_DURATION_RE = re.compile(r"(\d+)([dhms])")


class TimeParseError(ValueError):
    pass


def parse_timestamp(value: str) -> int:
    """Parse an ISO-8601 timestamp into integer epoch seconds (UTC)."""
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise TimeParseError(f"invalid timestamp {value!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(epoch: int) -> str:
    """Render epoch seconds as an ISO-8601 UTC string with a Z suffix."""
    dt = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_duration(value: str) -> int:
    """Parse a duration like ``3d``, ``12h``, ``90m``, ``45s``, or ``1d6h``.

    A bare integer is taken as seconds. Returns total seconds.
    """
    text = value.strip().lower()
    if not text:
        raise TimeParseError("empty duration")
    if text.isdigit():
        return int(text)
    units = {"d": 86400, "h": 3600, "m": 60, "s": 1}
    total = 0
    pos = 0
    for match in _DURATION_RE.finditer(text):
        if match.start() != pos:
            raise TimeParseError(f"invalid duration {value!r}")
        total += int(match.group(1)) * units[match.group(2)]
        pos = match.end()
    if pos != len(text):
        raise TimeParseError(f"invalid duration {value!r}")
    return total
