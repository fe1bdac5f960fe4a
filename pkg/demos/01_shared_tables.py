"""Shared time-stamped data tables: the hub every task reads and writes.

A table holds independent numbered series; each insert appends a
(timestamp, status, value) record.  Readers always see the most recent
record per series, and streaming consumers get a bounded live feed.
"""

from rtapc.records import now_utc
from rtapc.store import DataStore, NoDataError

store = DataStore()

# Writers append records; the newest one is what control code acts on.
store.insert_float("sensor", 1, now_utc(), "ok", 0.0)
store.insert_float("sensor", 1, now_utc(), "ok", 1.37)
store.insert_float("setpoint", 1, now_utc(), "ok", 2.0)
store.insert_int("opmode", 1, now_utc(), "ok", 1)

rec = store.read_recent_float("sensor", 1)
print(f"most recent sensor: {rec.value} (status={rec.status}, ts={rec.ts})")
print(f"operation mode:     {store.read_recent_int('opmode')}")

# Series keep their full history, oldest first.
history = store.read_all("sensor", 1)
print(f"sensor history:     {[r.value for r in history]}")

# Multi-channel reads gather index 1..n of a table in one call.
store.insert_float("actuator", 1, now_utc(), "ok", 0.2)
store.insert_float("actuator", 2, now_utc(), "ok", 0.3)
moves = store.read_recent_multi_float("actuator", 2)
print(f"actuator channels:  {[r.value for r in moves]}")

# Reading a series nobody has written is an error, not a default.
try:
    store.read_recent_float("sensor", 99)
except NoDataError as exc:
    print(f"missing series:     {exc}")

############################################################
# Live subscriptions: bounded queues with explicit gap markers

sub = store.subscribe(maxlen=4)
for k in range(6):  # two more than the buffer holds
    store.insert_float("sensor", 1, now_utc(), "ok", float(k))

event = sub.get(timeout=0.1)
print(f"first stream event: {event}")  # ('gap', 2): oldest entries were dropped
while (event := sub.get(timeout=0.1)) is not None:
    _, key, record = event
    print(f"  record {key.table}[{key.index}] = {record.value}")
store.unsubscribe(sub)
