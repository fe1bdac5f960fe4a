"""HTTP query/command surface over shared data for remote monitoring.

The gateway is stateless above the store: every query reads the tables, every
command is one store insert performed before the acknowledgment is sent, so an
acknowledged command is already visible to the next control tick.  Live updates
go out over a server-sent-events stream (``GET /api/stream``) with a heartbeat
comment every few seconds and an explicit gap marker when a slow consumer
overruns its buffer.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Mapping
from urllib.parse import parse_qs, urlsplit

from .records import STATUS_OK, Record, format_timestamp, now_utc
from .store import DataStore, NoDataError, Subscription, TableKey
from .timers import TickLog, TimerError, jitter_stats

log = logging.getLogger(__name__)

DEFAULT_PORT = 43080
HEARTBEAT_SECONDS = 5.0
STREAM_BUFFER = 1024

_CORS_HEADERS = (
    ("Access-Control-Allow-Origin", "*"),
    ("Access-Control-Allow-Methods", "GET, POST, OPTIONS"),
    ("Access-Control-Allow-Headers", "Content-Type"),
)


def record_to_json(record: Record) -> dict:
    return {
        "ts": format_timestamp(record.ts),
        "status": record.status,
        "value": record.value,
    }


class CommandError(ValueError):
    """Command rejected by validation; the store was not touched."""


def apply_setpoint(store: DataStore, index: int, value: float) -> dict:
    if not isinstance(index, int) or isinstance(index, bool) or index < 1:
        raise CommandError(f"setpoint index must be an integer >= 1, got {index!r}")
    value = _require_number("value", value)
    ts = now_utc()
    store.insert_float("setpoint", index, ts, STATUS_OK, value)
    return {"ok": True, "table": "setpoint", "index": index, "value": value, "ts": format_timestamp(ts)}


def apply_opmode(store: DataStore, value: int) -> dict:
    if value not in (0, 1) or isinstance(value, bool):
        raise CommandError(f"operation mode must be 0 (manual) or 1 (automatic), got {value!r}")
    ts = now_utc()
    store.insert_int("opmode", 1, ts, STATUS_OK, value)
    return {"ok": True, "table": "opmode", "value": value, "ts": format_timestamp(ts)}


def apply_tuning(store: DataStore, kp: float, tau_i: float, u_bar: float) -> dict:
    kp = _require_number("kp", kp)
    tau_i = _require_number("tau_i", tau_i)
    u_bar = _require_number("u_bar", u_bar)
    if not tau_i > 0:
        raise CommandError(f"tau_i must be positive, got {tau_i}")
    ts = now_utc()  # one timestamp so the three gains land as an atomic set
    store.insert_float("tuning_kp", 1, ts, STATUS_OK, kp)
    store.insert_float("tuning_taui", 1, ts, STATUS_OK, tau_i)
    store.insert_float("tuning_ubar", 1, ts, STATUS_OK, u_bar)
    return {"ok": True, "kp": kp, "tau_i": tau_i, "u_bar": u_bar, "ts": format_timestamp(ts)}


def _require_number(name: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CommandError(f"{name} must be a number, got {value!r}")
    return float(value)


def _parse_stream_keys(query: dict[str, list[str]]) -> set[TableKey] | None:
    """``?tables=sensor:1,actuator:2`` -> key set; absent -> None (all keys)."""
    raw = query.get("tables")
    if not raw:
        return None
    keys: set[TableKey] = set()
    for part in raw[0].split(","):
        part = part.strip()
        if not part:
            continue
        table, sep, index = part.rpartition(":")
        if not sep or not index.isdigit():
            raise CommandError(f"bad stream key {part!r}, expected table:index")
        keys.add(TableKey(table, int(index)))
    if not keys:
        raise CommandError("stream key list is empty")
    return keys


class _GatewayHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: "_GatewayHTTPServer"

    # -- plumbing ---------------------------------------------------------

    def log_message(self, fmt, *args):  # route to logging instead of stderr
        log.debug("gateway %s " + fmt, self.client_address[0], *args)

    def _send_json(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        for name, value in _CORS_HEADERS:
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(body)

    def _read_json_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        if length <= 0:
            raise CommandError("missing request body")
        try:
            payload = json.loads(self.rfile.read(length))
        except json.JSONDecodeError as exc:
            raise CommandError(f"bad JSON body: {exc}") from exc
        if not isinstance(payload, dict):
            raise CommandError("request body must be a JSON object")
        return payload

    # -- routes -----------------------------------------------------------

    def do_OPTIONS(self) -> None:
        self.send_response(204)
        for name, value in _CORS_HEADERS:
            self.send_header(name, value)
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self) -> None:
        url = urlsplit(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts[:2] == ["api", "tables"] and len(parts) == 4:
                self._get_table(parts[2], parts[3], parse_qs(url.query))
            elif parts[:2] == ["api", "jitter"] and len(parts) == 3:
                self._get_jitter(parts[2])
            elif parts == ["api", "stream"]:
                self._get_stream(parse_qs(url.query))
            else:
                self._send_json(404, {"ok": False, "error": f"unknown path {url.path}"})
        except CommandError as exc:
            self._send_json(400, {"ok": False, "error": str(exc)})

    def do_POST(self) -> None:
        url = urlsplit(self.path)
        store = self.server.store
        try:
            body = self._read_json_body()
            if url.path == "/api/setpoint":
                ack = apply_setpoint(store, body.get("index", 1), body.get("value"))
            elif url.path == "/api/opmode":
                ack = apply_opmode(store, body.get("value"))
            elif url.path == "/api/tuning":
                ack = apply_tuning(store, body.get("kp"), body.get("tau_i"), body.get("u_bar"))
            else:
                self._send_json(404, {"ok": False, "error": f"unknown path {url.path}"})
                return
        except CommandError as exc:
            self._send_json(400, {"ok": False, "error": str(exc)})
            return
        self._send_json(200, ack)

    def _get_table(self, table: str, index_text: str, query: dict) -> None:
        if not index_text.isdigit():
            raise CommandError(f"index must be an integer, got {index_text!r}")
        index = int(index_text)
        limit_text = query.get("limit", ["100"])[0]
        try:
            limit = int(limit_text)
        except ValueError:
            raise CommandError(f"limit must be an integer, got {limit_text!r}") from None
        if limit < 0:
            raise CommandError(f"limit must be >= 0, got {limit}")
        store = self.server.store
        if not store.has_series(table, index):
            self._send_json(404, {"ok": False, "error": f"no series {table}[{index}]"})
            return
        records = store.read_last(table, index, limit)
        self._send_json(
            200,
            {"table": table, "index": index, "records": [record_to_json(r) for r in records]},
        )

    def _get_jitter(self, name: str) -> None:
        log_for = self.server.jitter_sources.get(name)
        if log_for is None:
            self._send_json(404, {"ok": False, "error": f"unknown timer {name!r}"})
            return
        try:
            stats = jitter_stats(log_for)
        except TimerError as exc:
            self._send_json(409, {"ok": False, "error": str(exc)})
            return
        self._send_json(200, {"timer": name, **stats.to_json()})

    def _get_stream(self, query: dict) -> None:
        keys = _parse_stream_keys(query)
        server = self.server
        sub = server.store.subscribe(keys, maxlen=server.stream_buffer)
        server.track_subscription(sub)
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Connection", "close")
        for name, value in _CORS_HEADERS:
            self.send_header(name, value)
        self.end_headers()
        try:
            self._pump_stream(sub)
        except (BrokenPipeError, ConnectionResetError):
            pass  # client went away; nothing to salvage
        finally:
            server.store.unsubscribe(sub)
            server.untrack_subscription(sub)

    def _pump_stream(self, sub: Subscription) -> None:
        self._send_event({"type": "hello", "heartbeat": self.server.heartbeat})
        while not self.server.closing.is_set():
            item = sub.get(timeout=self.server.heartbeat)
            if item is None:
                if sub.closed:
                    return
                self._send_event({"type": "heartbeat", "ts": format_timestamp(now_utc())})
            elif item[0] == "gap":
                self._send_event({"type": "gap", "dropped": item[1]})
            else:
                _, key, record = item
                self._send_event(
                    {"type": "record", "table": key.table, "index": key.index, **record_to_json(record)}
                )

    def _send_event(self, payload: dict) -> None:
        self.wfile.write(b"data: " + json.dumps(payload).encode() + b"\n\n")
        self.wfile.flush()


class _GatewayHTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    # handler threads exit on their own once `closing` is set
    block_on_close = False

    def __init__(self, address, store: DataStore, jitter_sources, heartbeat: float, stream_buffer: int):
        super().__init__(address, _GatewayHandler)
        self.store = store
        self.jitter_sources = jitter_sources
        self.heartbeat = heartbeat
        self.stream_buffer = stream_buffer
        self.closing = threading.Event()
        self._subs_lock = threading.Lock()
        self._subs: set[Subscription] = set()

    def track_subscription(self, sub: Subscription) -> None:
        with self._subs_lock:
            self._subs.add(sub)

    def untrack_subscription(self, sub: Subscription) -> None:
        with self._subs_lock:
            self._subs.discard(sub)

    def close_subscriptions(self) -> None:
        with self._subs_lock:
            subs = list(self._subs)
        for sub in subs:
            sub.close()


class MonitorGateway:
    """Lifecycle wrapper around the HTTP server; restart loses no process data.

    ``jitter_sources`` maps timer names (as used in ``GET /api/jitter/{name}``)
    to live :class:`TickLog` objects; statistics are computed per request.
    """

    def __init__(
        self,
        store: DataStore,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        jitter_sources: Mapping[str, TickLog] | None = None,
        heartbeat: float = HEARTBEAT_SECONDS,
        stream_buffer: int = STREAM_BUFFER,
    ):
        if heartbeat <= 0:
            raise ValueError(f"heartbeat must be positive, got {heartbeat}")
        self._server = _GatewayHTTPServer(
            (host, port), store, dict(jitter_sources or {}), heartbeat, stream_buffer
        )
        self._thread: threading.Thread | None = None

    @property
    def host(self) -> str:
        return self._server.server_address[0]

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def register_jitter_source(self, name: str, log_: TickLog) -> None:
        self._server.jitter_sources[name] = log_

    def start(self) -> None:
        if self._thread is not None:
            raise RuntimeError("gateway already started")
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.1},
            name="gateway", daemon=True,
        )
        self._thread.start()
        log.info("gateway listening on %s:%d", self.host, self.port)

    def stop(self) -> None:
        self._server.closing.set()
        self._server.close_subscriptions()
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def __enter__(self) -> "MonitorGateway":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()
