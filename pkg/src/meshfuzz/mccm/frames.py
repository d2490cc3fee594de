"""Collector link wire protocol.

Frame layout (all integers little-endian):
    "MCCM" | version 0x01 | msg_type u8 | payload_len u32 | payload

Message types:
    0x01 PING   (empty)              0x81 PONG         (empty)
    0x02 COLLECT (empty)             0x82 COVERAGE     (u32 channel_id,
                                                        u32 size_m,
                                                        size_m bucket bytes)
    0x03 RESET  (empty)              0x83 ACK          (empty)
    0x04 STATUS (empty)              0x84 STATUS_REPLY (u32 channel_id,
                                                        u8 alive,
                                                        u32 restart_count)
    0x7f NACK   (u8 error code)
"""

import socket
import struct
import time
from dataclasses import dataclass

from meshfuzz.errors import ProtocolError

MAGIC = b"MCCM"
VERSION = 0x01
HEADER = struct.Struct("<4sBBI")

MSG_PING = 0x01
MSG_COLLECT = 0x02
MSG_RESET = 0x03
MSG_STATUS = 0x04
MSG_NACK = 0x7F
MSG_PONG = 0x81
MSG_COVERAGE = 0x82
MSG_ACK = 0x83
MSG_STATUS_REPLY = 0x84

KNOWN_TYPES = frozenset({
    MSG_PING, MSG_COLLECT, MSG_RESET, MSG_STATUS, MSG_NACK,
    MSG_PONG, MSG_COVERAGE, MSG_ACK, MSG_STATUS_REPLY,
})

NACK_NO_REGION = 0x01
NACK_BAD_TYPE = 0x02

MAX_PAYLOAD = 1 << 24


@dataclass(frozen=True)
class Frame:
    msg_type: int
    payload: bytes = b""


def encode_frame(frame: Frame) -> bytes:
    if frame.msg_type not in KNOWN_TYPES:
        raise ProtocolError(f"refusing to encode unknown msg_type 0x{frame.msg_type:02x}")
    return HEADER.pack(MAGIC, VERSION, frame.msg_type, len(frame.payload)) + frame.payload


def decode_frame(data: bytes) -> tuple[Frame, int]:
    """Decode one frame from the head of data; returns (frame, bytes consumed)."""
    if len(data) < HEADER.size:
        raise ProtocolError(f"frame shorter than header ({len(data)} bytes)")
    magic, version, msg_type, payload_len = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported version 0x{version:02x}")
    if msg_type not in KNOWN_TYPES:
        raise ProtocolError(f"unknown msg_type 0x{msg_type:02x}")
    if payload_len > MAX_PAYLOAD:
        raise ProtocolError(f"payload length {payload_len} exceeds cap")
    end = HEADER.size + payload_len
    if len(data) < end:
        raise ProtocolError(f"truncated payload: need {end}, have {len(data)}")
    return Frame(msg_type, bytes(data[HEADER.size:end])), end


def encode_coverage(channel_id: int, size_m: int, cells: bytes) -> Frame:
    if len(cells) != size_m:
        raise ProtocolError(f"coverage payload length {len(cells)} != size_m {size_m}")
    return Frame(MSG_COVERAGE, struct.pack("<II", channel_id, size_m) + cells)


def decode_coverage(frame: Frame) -> tuple[int, int, bytes]:
    if frame.msg_type != MSG_COVERAGE:
        raise ProtocolError(f"expected COVERAGE, got 0x{frame.msg_type:02x}")
    if len(frame.payload) < 8:
        raise ProtocolError("COVERAGE payload shorter than its fixed fields")
    channel_id, size_m = struct.unpack_from("<II", frame.payload)
    cells = frame.payload[8:]
    if len(cells) != size_m:
        raise ProtocolError(f"COVERAGE carries {len(cells)} cells, declared {size_m}")
    return channel_id, size_m, cells


def encode_status_reply(channel_id: int, alive: bool, restart_count: int) -> Frame:
    return Frame(MSG_STATUS_REPLY,
                 struct.pack("<IBI", channel_id, 1 if alive else 0, restart_count))


def decode_status_reply(frame: Frame) -> tuple[int, bool, int]:
    if frame.msg_type != MSG_STATUS_REPLY:
        raise ProtocolError(f"expected STATUS_REPLY, got 0x{frame.msg_type:02x}")
    if len(frame.payload) != 9:
        raise ProtocolError(f"STATUS_REPLY payload must be 9 bytes, got {len(frame.payload)}")
    channel_id, alive, restarts = struct.unpack("<IBI", frame.payload)
    return channel_id, bool(alive), restarts


# ---------------------------------------------------------------------------
# Blocking socket I/O with deadlines.
# ---------------------------------------------------------------------------

def recv_exact(sock: socket.socket, n: int, deadline: float) -> bytes:
    """Read exactly n bytes before the monotonic deadline or raise."""
    chunks = []
    got = 0
    while got < n:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise TimeoutError(f"deadline while reading {n} bytes (got {got})")
        sock.settimeout(remaining)
        chunk = sock.recv(n - got)
        if not chunk:
            raise ConnectionError("peer closed the connection")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket, timeout_s: float) -> Frame:
    deadline = time.monotonic() + timeout_s
    header = recv_exact(sock, HEADER.size, deadline)
    magic, version, msg_type, payload_len = HEADER.unpack(header)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported version 0x{version:02x}")
    if msg_type not in KNOWN_TYPES:
        raise ProtocolError(f"unknown msg_type 0x{msg_type:02x}")
    if payload_len > MAX_PAYLOAD:
        raise ProtocolError(f"payload length {payload_len} exceeds cap")
    payload = recv_exact(sock, payload_len, deadline) if payload_len else b""
    return Frame(msg_type, payload)


def write_frame(sock: socket.socket, frame: Frame) -> None:
    sock.sendall(encode_frame(frame))
