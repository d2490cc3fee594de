"""Message framing for the simulated target.

Two layers:
  * transport framing: every message travels as u32le length + bytes on a
    stream socket, so message boundaries survive arbitrary fuzzed contents;
  * TLV inside each message: msg_type u8, declared length u16le, payload.
    The declared length is fuzzable and may disagree with the delivered
    byte count; components branch on that disagreement.
"""

import socket
import struct
import time

WIRE_MAX = 1 << 20

# Entry-protocol message types.
MSG_REGISTER = 0x10
MSG_SETUP = 0x20
MSG_SERVICE = 0x30
MSG_SESSION_RESET = 0xFF
REPLY_FLAG = 0x80

# Reply status codes (payload byte 0).
ST_OK = 0x00
ST_MALFORMED = 0x01
ST_BAD_STATE = 0x02
ST_UNKNOWN_TYPE = 0x03
ST_REJECTED = 0x04
ST_DOWNSTREAM_ERROR = 0x05

# Downstream sub-protocol message types.
A_QUERY = 0xA1
A_RESET = 0xAF
B_DISCOVER = 0xB1
B_RESET = 0xBF
C_CONFIGURE = 0xC1
C_RESET = 0xCF

# Downstream reply statuses, stored into the entry's session flags.
FLAG_UNSET = 0x00
SMF_ACTIVE = 0x01
SMF_INACTIVE = 0x02
NRF_FULL = 0x01
NRF_LIMITED = 0x02
UPF_COMPLETE = 0x01
UPF_PARTIAL = 0x02
FLAG_UNAVAILABLE = 0xFF


def pack_tlv(msg_type: int, payload: bytes = b"") -> bytes:
    return struct.pack("<BH", msg_type, len(payload)) + payload


def reply_tlv(request_type: int, status: int) -> bytes:
    return pack_tlv(REPLY_FLAG | request_type, bytes([status]))


def send_frame(sock: socket.socket, data: bytes) -> None:
    sock.sendall(struct.pack("<I", len(data)) + data)


def recv_frame(sock: socket.socket, deadline: float) -> bytes | None:
    """Read one transport frame; None on clean EOF; raises TimeoutError or
    ConnectionError otherwise."""
    header = _recv_exact(sock, 4, deadline, eof_ok=True)
    if header is None:
        return None
    (length,) = struct.unpack("<I", header)
    if length > WIRE_MAX:
        raise ConnectionError(f"oversized wire frame ({length} bytes)")
    if length == 0:
        return b""
    body = _recv_exact(sock, length, deadline, eof_ok=False)
    return body


def _recv_exact(sock: socket.socket, n: int, deadline: float,
                eof_ok: bool) -> bytes | None:
    chunks = []
    got = 0
    while got < n:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise TimeoutError(f"deadline while reading {n} bytes")
        sock.settimeout(remaining)
        chunk = sock.recv(n - got)
        if not chunk:
            if eof_ok and got == 0:
                return None
            raise ConnectionError("peer closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)
