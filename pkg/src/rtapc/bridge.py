"""Periodic client task linking shared data to the plant server.

Each tick performs exactly one request/reply exchange: the most recent
actuator records go out verbatim, and the measurement records that come back
are stored verbatim, server timestamps included.  A lost connection aborts
the tick (the plant keeps its last held input) and reconnection is attempted
with exponential backoff on subsequent ticks.
"""

from __future__ import annotations

import logging
import socket
import time
from dataclasses import dataclass

from .protocol import Disconnected, FrameStream, ProtocolError
from .store import DataStore, NoDataError
from .timers import Clock, WallClock

log = logging.getLogger(__name__)

INITIAL_BACKOFF = 1.0
MAX_BACKOFF = 5.0
CONNECT_TIMEOUT = 5.0
EXCHANGE_TIMEOUT = 10.0


@dataclass
class BridgeConfig:
    host: str = "127.0.0.1"
    port: int = 43051
    interval: float = 0.5
    dim_table: str = "dim"
    max_connect_attempts: int = 8

    def __post_init__(self) -> None:
        if self.interval <= 0:
            raise ValueError(f"bridge interval must be positive, got {self.interval}")
        if self.max_connect_attempts < 1:
            raise ValueError("need at least one connect attempt")


def _connect(host: str, port: int) -> FrameStream:
    sock = socket.create_connection((host, port), timeout=CONNECT_TIMEOUT)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    sock.settimeout(EXCHANGE_TIMEOUT)
    return FrameStream(sock)


def connect_with_retry(cfg: BridgeConfig) -> FrameStream:
    """Connect at startup, backing off 1 s, 2 s, 4 s, then 5 s between attempts."""
    backoff = INITIAL_BACKOFF
    for attempt in range(1, cfg.max_connect_attempts + 1):
        try:
            stream = _connect(cfg.host, cfg.port)
            log.info("connected to plant server %s:%d (attempt %d)", cfg.host, cfg.port, attempt)
            return stream
        except OSError as exc:
            if attempt == cfg.max_connect_attempts:
                raise ConnectionError(
                    f"plant server {cfg.host}:{cfg.port} unreachable "
                    f"after {attempt} attempts: {exc}"
                ) from None
            log.info("connect attempt %d failed (%s); retrying in %.2f s", attempt, exc, backoff)
            time.sleep(backoff)
            backoff = min(backoff * 2.0, MAX_BACKOFF)
    raise AssertionError("unreachable")


class Bridge:
    """Client task: shared data <-> plant server, one exchange per tick."""

    def __init__(
        self,
        store: DataStore,
        cfg: BridgeConfig,
        stream: FrameStream | None = None,
        clock: Clock | None = None,
    ):
        self.store = store
        self.cfg = cfg
        self.stream = stream
        self.clock = clock if clock is not None else WallClock()
        self.exchanges = 0
        self._retry_at = self.clock.now()
        self._backoff = INITIAL_BACKOFF

    def connect(self) -> None:
        """Blocking startup connect with retry; fatal if attempts run out."""
        self.stream = connect_with_retry(self.cfg)
        self._backoff = INITIAL_BACKOFF

    def disconnect(self) -> None:
        if self.stream is not None:
            self.stream.close()
            self.stream = None

    def _drop_connection(self, why: str) -> None:
        log.warning("plant link lost: %s", why)
        self.disconnect()
        self._retry_at = self.clock.now()  # retry on the next tick
        self._backoff = INITIAL_BACKOFF

    def _try_reconnect(self) -> bool:
        now = self.clock.now()
        if now < self._retry_at:
            return False
        try:
            self.stream = _connect(self.cfg.host, self.cfg.port)
        except OSError as exc:
            log.info("reconnect failed (%s); next attempt in %.2f s", exc, self._backoff)
            self._retry_at = now + self._backoff
            self._backoff = min(self._backoff * 2.0, MAX_BACKOFF)
            return False
        log.info("reconnected to plant server %s:%d", self.cfg.host, self.cfg.port)
        self._backoff = INITIAL_BACKOFF
        return True

    def tick(self) -> None:
        """One request/reply exchange; skips quietly when data or link is missing."""
        if self.stream is None and not self._try_reconnect():
            return
        try:
            dims = self.store.read_dimensions(self.cfg.dim_table)
        except NoDataError as exc:
            log.warning("bridge tick skipped: %s", exc)
            return
        try:
            request = self.store.read_recent_multi_float("actuator", dims.n_manip)
        except NoDataError as exc:
            log.info("bridge tick skipped, no actuator data yet: %s", exc)
            return
        try:
            self.stream.send_frame(request)
            reply = self.stream.recv_frame()
        except Disconnected as exc:
            self._drop_connection(str(exc))
            return
        except ProtocolError as exc:
            self._drop_connection(f"exchange failed: {exc}")
            return
        if len(reply) != dims.n_meas:
            self._drop_connection(f"expected {dims.n_meas} measurements, got {len(reply)}")
            return
        for i, record in enumerate(reply, start=1):
            self.store.insert_float("sensor", i, record.ts, record.status, record.value)
        self.exchanges += 1
