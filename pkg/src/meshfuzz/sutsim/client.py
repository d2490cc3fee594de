"""Fuzzer-side client for the entry component's message link."""

import socket
import time

from meshfuzz.sutsim import tlv


class TargetClient:
    """Framed request/reply link to the entry component.

    Keeps one persistent connection; the campaign decides what a send or
    receive failure means (crash vs transport trouble) and when to reconnect.
    """

    def __init__(self, host: str, port: int, timeout_s: float = 0.2):
        self.host = host
        self.port = port
        self.timeout_s = timeout_s
        self._sock: socket.socket | None = None

    @property
    def connected(self) -> bool:
        return self._sock is not None

    def connect(self, attempts: int = 1, retry_delay_s: float = 0.05) -> None:
        last_exc: OSError | None = None
        for _ in range(attempts):
            try:
                sock = socket.create_connection((self.host, self.port),
                                                timeout=self.timeout_s)
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                self._sock = sock
                return
            except OSError as exc:
                last_exc = exc
                time.sleep(retry_delay_s)
        raise ConnectionError(f"cannot reach entry at {self.host}:{self.port}: {last_exc}")

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def request(self, message: bytes, timeout_s: float | None = None) -> bytes:
        """Send one framed message and read one framed reply.

        Raises TimeoutError when the reply misses the deadline and
        ConnectionError when the link drops; the socket is closed on either.
        """
        if timeout_s is None:
            timeout_s = self.timeout_s
        if self._sock is None:
            self.connect()
        try:
            tlv.send_frame(self._sock, message)
            reply = tlv.recv_frame(self._sock, time.monotonic() + timeout_s)
        except (TimeoutError, ConnectionError, OSError) as exc:
            self.close()
            if isinstance(exc, TimeoutError):
                raise
            raise ConnectionError(str(exc)) from exc
        if reply is None:
            self.close()
            raise ConnectionError("entry closed the connection")
        return reply
