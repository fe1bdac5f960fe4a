"""Time-stamped, status-tagged samples: the unit of shared data and wire traffic.

Every value exchanged between tasks carries a UTC timestamp with microsecond
resolution and a short status token.  The canonical timestamp text is exactly
26 characters, ``YYYY-MM-DD HH:MM:SS.ffffff``, so records have a fixed,
human-readable shape in journals, CSV exports, and on the wire.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from datetime import datetime, timezone

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S.%f"
TIMESTAMP_WIDTH = 26

# Characters that separate fields and records in journals and wire frames.
# They may not appear inside any field.
FIELD_DELIMITER = "|"
RECORD_DELIMITER = ";"
FRAME_TERMINATOR = "\n"

_FORBIDDEN = FIELD_DELIMITER + RECORD_DELIMITER + FRAME_TERMINATOR


class RecordError(ValueError):
    """A record field violates its invariants."""


def format_timestamp(ts: datetime) -> str:
    """Render a UTC instant as the canonical 26-character text."""
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    text = ts.strftime(TIMESTAMP_FORMAT)
    if len(text) != TIMESTAMP_WIDTH:
        # strftime pads the year only from 1000 onwards
        raise RecordError(f"timestamp {text!r} does not render to 26 characters")
    return text


def parse_timestamp(text: str) -> datetime:
    """Parse the canonical 26-character form back into an aware UTC datetime."""
    if len(text) != TIMESTAMP_WIDTH:
        raise RecordError(
            f"timestamp must be exactly {TIMESTAMP_WIDTH} characters, got {len(text)}: {text!r}"
        )
    try:
        naive = datetime.strptime(text, TIMESTAMP_FORMAT)
    except ValueError as exc:
        raise RecordError(f"bad timestamp {text!r}: {exc}") from None
    return naive.replace(tzinfo=timezone.utc)


def to_unix(ts: datetime) -> float:
    """Fractional Unix seconds for a UTC instant (used by CSV export)."""
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.timestamp()


def from_unix(seconds: float) -> datetime:
    """Inverse of :func:`to_unix`, truncated to microsecond resolution."""
    return datetime.fromtimestamp(seconds, tz=timezone.utc)


_now_lock = threading.Lock()
_now_last: datetime | None = None


def now_utc() -> datetime:
    """Current wall-clock instant, microsecond resolution, UTC.

    Guaranteed monotonically nondecreasing within one process even if the
    system clock steps backwards.
    """
    global _now_last
    t = datetime.now(timezone.utc)
    with _now_lock:
        if _now_last is not None and t < _now_last:
            t = _now_last
        else:
            _now_last = t
    return t


def validate_status(token: str) -> str:
    """Check a status token: non-empty, delimiter-free, no edge whitespace."""
    if not isinstance(token, str) or not token:
        raise RecordError("status token must be a non-empty string")
    if token != token.strip():
        raise RecordError(f"status token {token!r} has leading/trailing whitespace")
    for ch in _FORBIDDEN:
        if ch in token:
            raise RecordError(f"status token {token!r} contains delimiter {ch!r}")
    return token


STATUS_OK = "ok"
STATUS_ERROR = "error"


@dataclass(frozen=True)
class Record:
    """One time-stamped, status-tagged numeric sample.

    ``value`` is a finite float for process variables; configuration tables
    (operation mode, dimensions) hold ints instead.
    """

    ts: datetime
    status: str
    value: float

    def __post_init__(self) -> None:
        validate_status(self.status)
        if isinstance(self.value, bool) or not isinstance(self.value, (int, float)):
            raise RecordError(f"record value must be numeric, got {type(self.value).__name__}")
        if not math.isfinite(self.value):
            raise RecordError(f"record value must be finite, got {self.value!r}")


def render_value(value: float) -> str:
    """Shortest decimal text that parses back to the identical float64."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RecordError(f"value must be numeric, got {type(value).__name__}")
    if not math.isfinite(value):
        raise RecordError(f"value must be finite, got {value!r}")
    if isinstance(value, int):
        return repr(value)
    return repr(float(value))


def parse_value(text: str) -> float:
    """Parse a float field, rejecting non-finite and malformed text."""
    try:
        v = float(text)
    except ValueError:
        raise RecordError(f"bad numeric value {text!r}") from None
    if not math.isfinite(v):
        raise RecordError(f"non-finite value {text!r}")
    return v


def format_record(record: Record) -> str:
    """One record as ``<timestamp>|<status>|<value>`` (journal and wire grammar)."""
    return FIELD_DELIMITER.join(
        (format_timestamp(record.ts), record.status, render_value(record.value))
    )


def parse_record(text: str) -> Record:
    """Inverse of :func:`format_record` for float-valued records."""
    fields = text.split(FIELD_DELIMITER)
    if len(fields) != 3:
        raise RecordError(f"expected 3 fields, got {len(fields)} in {text!r}")
    ts = parse_timestamp(fields[0])
    status = validate_status(fields[1])
    return Record(ts, status, parse_value(fields[2]))
