"""Collection controller: fans requests out to per-component collectors.

COLLECT is issued to every endpoint concurrently with a join barrier; a
channel that times out or is unreachable yields an explicit MissingChannel
marker (treated as zero gain downstream), never a fabricated map. Malformed
replies raise, naming the endpoint: that is an infrastructure bug, not a
degraded mode.
"""

import socket
import threading
import time
from dataclasses import dataclass, field

from meshfuzz.coverage import CoverageMap
from meshfuzz.errors import ConfigError, ProtocolError
from meshfuzz.mccm import frames


@dataclass(frozen=True)
class CollectorEndpoint:
    channel_id: int
    host: str
    port: int
    region_name: str = ""
    timeout_ms: int = 250

    def __post_init__(self):
        if self.timeout_ms < 10:
            raise ConfigError("collector timeout_ms must be >= 10")


@dataclass(frozen=True)
class MissingChannel:
    """Placeholder for a channel that did not deliver a snapshot."""

    channel_id: int
    reason: str


@dataclass
class ControllerLogEntry:
    op: str
    reason: str
    channel_ids: tuple[int, ...]
    missing: tuple[int, ...] = ()
    timestamp: float = field(default_factory=time.monotonic)


class Controller:
    """Holds persistent connections to the collectors and a request log."""

    def __init__(self):
        self._conns: dict[int, socket.socket] = {}
        self._lock = threading.Lock()
        self.request_log: list[ControllerLogEntry] = []

    # -- connection management ----------------------------------------------

    def _connect(self, ep: CollectorEndpoint) -> socket.socket:
        conn = self._conns.get(ep.channel_id)
        if conn is not None:
            return conn
        conn = socket.create_connection((ep.host, ep.port), timeout=ep.timeout_ms / 1000.0)
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._conns[ep.channel_id] = conn
        return conn

    def _drop(self, ep: CollectorEndpoint) -> None:
        conn = self._conns.pop(ep.channel_id, None)
        if conn is not None:
            try:
                conn.close()
            except OSError:
                pass

    def close(self) -> None:
        with self._lock:
            for conn in self._conns.values():
                try:
                    conn.close()
                except OSError:
                    pass
            self._conns.clear()

    # -- request primitives ---------------------------------------------------

    def _roundtrip(self, ep: CollectorEndpoint, request: frames.Frame) -> frames.Frame:
        conn = self._connect(ep)
        try:
            frames.write_frame(conn, request)
            return frames.read_frame(conn, ep.timeout_ms / 1000.0)
        except (TimeoutError, ConnectionError, OSError):
            self._drop(ep)
            raise

    def ping(self, ep: CollectorEndpoint) -> bool:
        try:
            reply = self._roundtrip(ep, frames.Frame(frames.MSG_PING))
        except (TimeoutError, ConnectionError, OSError):
            return False
        return reply.msg_type == frames.MSG_PONG

    def _collect_one(self, ep: CollectorEndpoint) -> CoverageMap | MissingChannel:
        try:
            reply = self._roundtrip(ep, frames.Frame(frames.MSG_COLLECT))
        except TimeoutError:
            return MissingChannel(ep.channel_id, "timeout")
        except (ConnectionError, OSError) as exc:
            return MissingChannel(ep.channel_id, f"unreachable: {exc}")
        if reply.msg_type == frames.MSG_NACK:
            code = reply.payload[0] if reply.payload else -1
            return MissingChannel(ep.channel_id, f"nack 0x{code:02x}")
        try:
            channel_id, size_m, cells = frames.decode_coverage(reply)
        except ProtocolError as exc:
            raise ProtocolError(f"collector {ep.host}:{ep.port} "
                                f"(channel {ep.channel_id}): {exc}") from exc
        if channel_id != ep.channel_id:
            raise ProtocolError(f"collector {ep.host}:{ep.port} replied for channel "
                                f"{channel_id}, expected {ep.channel_id}")
        return CoverageMap.from_bytes(channel_id, cells, classified=True)

    def _reset_one(self, ep: CollectorEndpoint) -> bool:
        try:
            reply = self._roundtrip(ep, frames.Frame(frames.MSG_RESET))
        except (TimeoutError, ConnectionError, OSError):
            return False
        return reply.msg_type == frames.MSG_ACK

    # -- fan-out operations ----------------------------------------------------

    def _fan_out(self, endpoints: list[CollectorEndpoint], worker):
        results: dict[int, object] = {}
        errors: list[BaseException] = []

        def run(ep: CollectorEndpoint):
            try:
                results[ep.channel_id] = worker(ep)
            except BaseException as exc:  # noqa: BLE001 - re-raised after join
                errors.append(exc)

        threads = [threading.Thread(target=run, args=(ep,), daemon=True)
                   for ep in endpoints]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]
        return results

    def collect(self, endpoints: list[CollectorEndpoint],
                reason: str = "") -> dict[int, CoverageMap | MissingChannel]:
        """Concurrent COLLECT across endpoints; every channel gets either a
        classified snapshot or a MissingChannel marker."""
        with self._lock:
            results = self._fan_out(endpoints, self._collect_one)
            missing = tuple(cid for cid, r in results.items()
                            if isinstance(r, MissingChannel))
            self.request_log.append(ControllerLogEntry(
                "collect", reason, tuple(ep.channel_id for ep in endpoints), missing))
            return results

    def reset(self, endpoints: list[CollectorEndpoint]) -> dict[int, bool]:
        """RESET every endpoint (sequential: the payloads are tiny and this
        runs once per test case, so thread fan-out would cost more than the
        round trips). Returns per-channel success flags."""
        with self._lock:
            return {ep.channel_id: self._reset_one(ep) for ep in endpoints}
