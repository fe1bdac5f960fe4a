"""Text frames that carry batches of records over a TCP byte stream.

Grammar, bit-exact on the wire (UTF-8, no length prefix)::

    frame   = record *( ";" record ) "\\n"
    record  = timestamp "|" status "|" value
    value   = shortest decimal text that parses back to the identical float64

A frame holds one record per process variable, mirroring the pack/unpack
helpers the plant link uses on both ends.  The newline terminator makes
reassembly trivial: a receiver buffers bytes until it sees ``\\n``, no matter
how the transport chunks or coalesces writes.
"""

from __future__ import annotations

import socket

from .records import (
    FIELD_DELIMITER,
    FRAME_TERMINATOR,
    RECORD_DELIMITER,
    Record,
    RecordError,
    format_record,
    parse_timestamp,
    parse_value,
    validate_status,
)

MAX_FRAME_BYTES = 64 * 1024


class ProtocolError(Exception):
    """Malformed frame or protocol violation."""


class FrameParseError(ProtocolError):
    """A frame failed to parse; ``record_index`` names the offending record (1-based)."""

    def __init__(self, message: str, record_index: int | None = None):
        super().__init__(message)
        self.record_index = record_index


class Disconnected(ConnectionError):
    """The peer closed the connection (distinct from a parse error)."""


def pack_multi(records: list[Record]) -> str:
    """Encode records into one newline-terminated frame."""
    if not records:
        raise ProtocolError("cannot pack an empty record batch")
    return RECORD_DELIMITER.join(format_record(r) for r in records) + FRAME_TERMINATOR


def unpack_multi(text: str) -> list[Record]:
    """Decode one frame; exact inverse of :func:`pack_multi`."""
    if not text.endswith(FRAME_TERMINATOR):
        raise FrameParseError("frame is not newline-terminated")
    body = text[:-1]
    if FRAME_TERMINATOR in body:
        raise FrameParseError("frame contains an interior newline")
    records = []
    for i, chunk in enumerate(body.split(RECORD_DELIMITER), start=1):
        fields = chunk.split(FIELD_DELIMITER)
        if len(fields) != 3:
            raise FrameParseError(
                f"record {i}: expected 3 fields, got {len(fields)}", record_index=i
            )
        try:
            ts = parse_timestamp(fields[0])
            status = validate_status(fields[1])
            value = parse_value(fields[2])
        except RecordError as exc:
            raise FrameParseError(f"record {i}: {exc}", record_index=i) from None
        records.append(Record(ts, status, value))
    return records


class FrameStream:
    """Framing layer over a connected stream socket.

    ``recv_frame`` blocks until a full frame arrives, reassembling partial
    reads and splitting coalesced ones.  Frames beyond ``MAX_FRAME_BYTES``
    abort the connection.
    """

    def __init__(self, sock: socket.socket, max_frame_bytes: int = MAX_FRAME_BYTES):
        self._sock = sock
        self._buffer = bytearray()
        self._max = max_frame_bytes

    def send_frame(self, records: list[Record]) -> None:
        data = pack_multi(records).encode("utf-8")
        try:
            self._sock.sendall(data)
        except (BrokenPipeError, ConnectionResetError, OSError) as exc:
            raise Disconnected(f"peer closed during send: {exc}") from None

    def recv_frame(self) -> list[Record]:
        while True:
            newline = self._buffer.find(b"\n")
            if newline >= 0:
                raw = bytes(self._buffer[: newline + 1])
                del self._buffer[: newline + 1]
                return unpack_multi(raw.decode("utf-8"))
            if len(self._buffer) > self._max:
                self.close()
                raise ProtocolError(
                    f"frame exceeds {self._max} bytes without a terminator; connection dropped"
                )
            try:
                chunk = self._sock.recv(4096)
            except (ConnectionResetError, OSError) as exc:
                raise Disconnected(f"connection lost during recv: {exc}") from None
            if not chunk:
                raise Disconnected(
                    "peer closed mid-frame"
                    if self._buffer
                    else "peer closed the connection"
                )
            self._buffer.extend(chunk)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()

    def fileno(self) -> int:
        return self._sock.fileno()
