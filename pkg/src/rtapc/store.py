"""Append-only, time-ordered store of tagged records shared by concurrent tasks.

Each (table, index) pair addresses the history of one variable: ``("sensor", 1)``
is the first measurement, ``("actuator", 2)`` the second manipulated variable,
and so on.  All operations are atomic under one lock, so any number of periodic
tasks may read and write without coordination.  Tables are created on first
insert.  Optionally every series is mirrored to an append-only journal file
whose lines use the same ``timestamp|status|value`` grammar as the wire
protocol.
"""

from __future__ import annotations

import csv
import io
import os
import re
import threading
from collections import deque
from dataclasses import dataclass
from datetime import datetime
from typing import Callable, Iterable, NamedTuple

from .records import (
    Record,
    RecordError,
    format_record,
    format_timestamp,
    parse_timestamp,
    render_value,
    to_unix,
    validate_status,
)


class StoreError(Exception):
    """Base class for shared-data failures."""


class NoDataError(StoreError, LookupError):
    """A read addressed a series that holds no records yet."""

    def __init__(self, table: str, index: int):
        super().__init__(f"no data for table {table!r} index {index}")
        self.table = table
        self.index = index


class TableKey(NamedTuple):
    """Addresses one variable's history: a table name plus a 1-based index."""

    table: str
    index: int


@dataclass(frozen=True)
class DimensionSpec:
    """Loop dimensions: measurements, setpoints, manipulated variables."""

    n_meas: int
    n_setp: int
    n_manip: int

    def __post_init__(self) -> None:
        for name, n in (("n_meas", self.n_meas), ("n_setp", self.n_setp), ("n_manip", self.n_manip)):
            if not isinstance(n, int) or n < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {n!r}")


_TABLE_NAME_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


def _check_key(table: str, index: int) -> TableKey:
    if not isinstance(table, str) or not _TABLE_NAME_RE.match(table):
        raise StoreError(f"bad table name {table!r}")
    if not isinstance(index, int) or isinstance(index, bool) or index < 1:
        raise StoreError(f"index must be an integer >= 1, got {index!r}")
    return TableKey(table, index)


class _Series:
    """History of one variable plus its journal handle, if journaling is on."""

    __slots__ = ("records", "kind", "journal")

    def __init__(self, kind: str, journal: io.TextIOBase | None):
        self.records: list[Record] = []
        self.kind = kind  # "float" or "int"
        self.journal = journal


class Subscription:
    """Bounded queue of records delivered to one streaming consumer.

    Appends happen under the store lock, so per-key ordering matches insertion
    order.  When the buffer overflows, the oldest entries are dropped and a gap
    marker is emitted before the next delivered record.
    """

    def __init__(self, keys: set[TableKey] | None, maxlen: int):
        self._keys = keys
        self._queue: deque[tuple[TableKey, Record]] = deque()
        self._maxlen = maxlen
        self._dropped = 0
        self._cond = threading.Condition()
        self._closed = False

    def _matches(self, key: TableKey) -> bool:
        return self._keys is None or key in self._keys

    def _push(self, key: TableKey, record: Record) -> None:
        with self._cond:
            if self._closed:
                return
            if len(self._queue) >= self._maxlen:
                self._queue.popleft()
                self._dropped += 1
            self._queue.append((key, record))
            self._cond.notify()

    def get(self, timeout: float | None = None):
        """Next event or ``None`` on timeout/close.

        Returns either ``("gap", n_dropped)`` or ``("record", key, record)``.
        """
        with self._cond:
            if not self._queue and not self._closed:
                self._cond.wait(timeout)
            if self._dropped:
                n, self._dropped = self._dropped, 0
                return ("gap", n)
            if self._queue:
                key, record = self._queue.popleft()
                return ("record", key, record)
            return None

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        return self._closed


class DataStore:
    """In-process shared-data tables with mutual exclusion.

    Parameters
    ----------
    journal_dir:
        If given, every series is mirrored to ``<dir>/<table>__<index>.journal``
        with one ``timestamp|status|value`` line per record.  Existing journals
        in the directory are replayed into memory on construction.
    """

    def __init__(self, journal_dir: str | os.PathLike | None = None):
        self._lock = threading.Lock()
        self._series: dict[TableKey, _Series] = {}
        self._subscribers: list[Subscription] = []
        self._journal_dir = os.fspath(journal_dir) if journal_dir is not None else None
        if self._journal_dir is not None:
            os.makedirs(self._journal_dir, exist_ok=True)
            self._replay_journals()

    # -- journaling ----------------------------------------------------------

    def _journal_path(self, key: TableKey) -> str:
        assert self._journal_dir is not None
        return os.path.join(self._journal_dir, f"{key.table}__{key.index}.journal")

    def _open_journal(self, key: TableKey):
        if self._journal_dir is None:
            return None
        return open(self._journal_path(key), "a", encoding="utf-8", buffering=1)

    def _replay_journals(self) -> None:
        assert self._journal_dir is not None
        for name in sorted(os.listdir(self._journal_dir)):
            if not name.endswith(".journal"):
                continue
            stem = name[: -len(".journal")]
            table, sep, index_text = stem.rpartition("__")
            if not sep or not index_text.isdigit():
                raise StoreError(f"unrecognized journal file name {name!r}")
            key = _check_key(table, int(index_text))
            records, kind = [], "float"
            with open(os.path.join(self._journal_dir, name), encoding="utf-8") as fh:
                for line in fh:
                    line = line.rstrip("\n")
                    if not line:
                        continue
                    ts_text, status, value_text = line.split("|")
                    if re.fullmatch(r"-?\d+", value_text):
                        kind = "int"
                        value: float = int(value_text)
                    else:
                        value = float(value_text)
                    records.append(Record(parse_timestamp(ts_text), validate_status(status), value))
            series = _Series(kind, self._open_journal(key))
            series.records = records
            self._series[key] = series

    # -- writes --------------------------------------------------------------

    def _insert(self, table: str, index: int, ts: datetime, status: str, value, kind: str) -> None:
        key = _check_key(table, index)
        record = Record(ts, status, value)  # validates finiteness and status
        with self._lock:
            series = self._series.get(key)
            if series is None:
                series = _Series(kind, self._open_journal(key))
                self._series[key] = series
            elif series.kind != kind:
                raise StoreError(
                    f"table {table!r} index {index} holds {series.kind} records, not {kind}"
                )
            series.records.append(record)
            if series.journal is not None:
                series.journal.write(format_record(record) + "\n")
            for sub in self._subscribers:
                if sub._matches(key):
                    sub._push(key, record)

    def insert_float(self, table: str, index: int, ts: datetime, status: str, value: float) -> None:
        """Append a float record; the series is created if it does not exist."""
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise RecordError(f"float insert needs a number, got {type(value).__name__}")
        self._insert(table, index, ts, status, float(value), "float")

    def insert_int(self, table: str, index: int, ts: datetime, status: str, value: int) -> None:
        """Append an integer record (operation mode, dimension tables)."""
        if isinstance(value, bool) or not isinstance(value, int):
            raise RecordError(f"int insert needs an integer, got {value!r}")
        self._insert(table, index, ts, status, value, "int")

    # -- reads ---------------------------------------------------------------

    def _recent(self, table: str, index: int, kind: str) -> Record:
        key = _check_key(table, index)
        with self._lock:
            series = self._series.get(key)
            if series is None or not series.records:
                raise NoDataError(table, index)
            if series.kind != kind:
                raise StoreError(
                    f"table {table!r} index {index} holds {series.kind} records, not {kind}"
                )
            return series.records[-1]

    def read_recent_float(self, table: str, index: int) -> Record:
        """Most recent record of one float series."""
        return self._recent(table, index, "float")

    def read_recent_multi_float(self, table: str, count: int) -> list[Record]:
        """Most recent record for each of indices 1..count of a float table."""
        if count < 1:
            raise StoreError(f"count must be >= 1, got {count}")
        return [self._recent(table, i, "float") for i in range(1, count + 1)]

    def read_recent_int(self, table: str, index: int = 1) -> int:
        """Most recent integer value of one series."""
        return int(self._recent(table, index, "int").value)

    def read_recent_multi_int(self, table: str, count: int) -> list[int]:
        """Most recent integer for each of indices 1..count."""
        if count < 1:
            raise StoreError(f"count must be >= 1, got {count}")
        return [int(self._recent(table, i, "int").value) for i in range(1, count + 1)]

    def read_dimensions(self, table: str = "dim") -> DimensionSpec:
        """The three loop dimensions from the dimension table."""
        n = self.read_recent_multi_int(table, 3)
        return DimensionSpec(*n)

    def read_all(self, table: str, index: int) -> list[Record]:
        """Full history of one series in insertion order."""
        key = _check_key(table, index)
        with self._lock:
            series = self._series.get(key)
            if series is None:
                raise NoDataError(table, index)
            return list(series.records)

    def read_last(self, table: str, index: int, limit: int) -> list[Record]:
        """Up to ``limit`` newest records, newest first."""
        if limit < 0:
            raise StoreError(f"limit must be >= 0, got {limit}")
        key = _check_key(table, index)
        with self._lock:
            series = self._series.get(key)
            if series is None:
                raise NoDataError(table, index)
            if limit == 0:
                return []
            return list(reversed(series.records[-limit:]))

    def has_series(self, table: str, index: int) -> bool:
        with self._lock:
            return TableKey(table, index) in self._series

    def keys(self) -> list[TableKey]:
        """All known (table, index) pairs, sorted."""
        with self._lock:
            return sorted(self._series)

    # -- streaming -----------------------------------------------------------

    def subscribe(
        self, keys: Iterable[tuple[str, int]] | None = None, maxlen: int = 1024
    ) -> Subscription:
        """Register a bounded push queue for records inserted from now on.

        ``keys=None`` subscribes to every table.
        """
        key_set = None if keys is None else {TableKey(t, i) for t, i in keys}
        sub = Subscription(key_set, maxlen)
        with self._lock:
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        sub.close()
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    # -- export --------------------------------------------------------------

    def export_csv(self, fh, unix_time: bool = False) -> int:
        """Dump every record as ``table,index,timestamp,status,value`` rows.

        With ``unix_time=True`` the timestamp column holds fractional Unix
        seconds instead of the canonical 26-character form.  Returns the row
        count.
        """
        writer = csv.writer(fh)
        writer.writerow(["table", "index", "timestamp", "status", "value"])
        rows = 0
        for key in self.keys():
            for record in self.read_all(key.table, key.index):
                stamp = repr(to_unix(record.ts)) if unix_time else format_timestamp(record.ts)
                writer.writerow([key.table, key.index, stamp, record.status, render_value(record.value)])
                rows += 1
        return rows

    def close(self) -> None:
        """Close journal handles and wake all subscribers."""
        with self._lock:
            subs = list(self._subscribers)
            self._subscribers.clear()
            for series in self._series.values():
                if series.journal is not None:
                    series.journal.close()
                    series.journal = None
        for sub in subs:
            sub.close()
