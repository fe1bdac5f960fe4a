"""TCP server co-located with the plant: applies actuator frames, replies with
freshly stamped measurements.

One client is active at a time; further connections wait in the accept
backlog and are served in turn.  A malformed frame drops the connection
without a reply (the control side treats that as a disconnect and retries),
and a disconnect never disturbs the running simulator.
"""

from __future__ import annotations

import logging
import socket
import threading

from .protocol import Disconnected, FrameStream, ProtocolError
from .records import Record, now_utc
from .simulation import PlantState

log = logging.getLogger(__name__)

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 43051
CLIENT_BACKLOG = 3


def open_listener(host: str = DEFAULT_HOST, port: int = DEFAULT_PORT) -> socket.socket:
    """Bound, listening socket; raises OSError if the port is taken."""
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    listener.bind((host, port))
    listener.listen(CLIENT_BACKLOG)
    return listener


def accept_one(listener: socket.socket) -> FrameStream:
    """Block until one client connects; returns its framing layer."""
    conn, addr = listener.accept()
    conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    log.info("client connected from %s:%s", *addr)
    return FrameStream(conn)


def serve_loop(state: PlantState, stream: FrameStream) -> None:
    """Request/reply loop for one client; returns when it disconnects.

    Per iteration: receive one frame of n_inputs actuator records, hold those
    inputs in the shared plant state, then reply with n_outputs measurement
    records stamped inside the critical section.
    """
    n_inputs = state.dims.n_inputs
    while True:
        try:
            request = stream.recv_frame()
        except Disconnected as exc:
            log.info("client disconnected: %s", exc)
            return
        except ProtocolError as exc:
            log.warning("malformed frame, dropping client: %s", exc)
            stream.close()
            return
        if len(request) != n_inputs:
            log.warning(
                "expected %d actuator records, got %d; dropping client", n_inputs, len(request)
            )
            stream.close()
            return
        state.write_inputs([r.value for r in request])
        with state.lock:
            reply = [Record(now_utc(), state.status, float(v)) for v in state.y]
        try:
            stream.send_frame(reply)
        except Disconnected as exc:
            log.info("client disconnected: %s", exc)
            return


class PlantServer:
    """Accept loop on its own thread: one client served at a time, forever."""

    def __init__(self, state: PlantState, host: str = DEFAULT_HOST, port: int = DEFAULT_PORT):
        self.state = state
        self._listener = open_listener(host, port)
        # accept with a short timeout: closing the listener from another
        # thread does not wake a blocked accept(), so poll the closing flag
        self._listener.settimeout(0.25)
        self.host, self.port = self._listener.getsockname()
        self._thread: threading.Thread | None = None
        self._active: FrameStream | None = None
        self._closing = False

    def start(self) -> "PlantServer":
        self._thread = threading.Thread(target=self._accept_loop, name="plant-server", daemon=True)
        self._thread.start()
        return self

    def _accept_loop(self) -> None:
        while not self._closing:
            try:
                stream = accept_one(self._listener)
            except TimeoutError:
                continue
            except OSError:
                return  # listener closed
            self._active = stream
            try:
                serve_loop(self.state, stream)
            finally:
                self._active = None
                stream.close()

    def stop(self) -> None:
        self._closing = True
        self._listener.close()
        active = self._active
        if active is not None:
            active.close()
        if self._thread is not None:
            self._thread.join(timeout=5)
