"""Per-component coverage collector.

A small service deployed next to each target component. On COLLECT it
snapshots the component's shared coverage region (generation-checked),
classifies the counters into buckets, and returns them; RESET zeroes the
region; STATUS reports what can be read from the region header. Serves one
request at a time.

Run standalone:  python -m meshfuzz.mccm.collector --region R --listen PORT
                 --channel ID
"""

import argparse
import socket
import sys
import threading

import numpy as np

from meshfuzz import kernels
from meshfuzz.errors import ProtocolError
from meshfuzz.mccm import frames
from meshfuzz.mccm.region import Region


class CollectorService:
    def __init__(self, region_path: str, host: str, port: int, channel_id: int):
        self.region_path = region_path
        self.host = host
        self.port = port
        self.channel_id = channel_id
        self._region: Region | None = None
        self._listener: socket.socket | None = None

    # -- region access ------------------------------------------------------

    def _attach(self) -> Region | None:
        if self._region is None:
            try:
                self._region = Region(self.region_path)
            except (OSError, ProtocolError):
                return None
        return self._region

    # -- request handling ----------------------------------------------------

    def handle_frame(self, frame: frames.Frame) -> frames.Frame:
        if frame.msg_type == frames.MSG_PING:
            return frames.Frame(frames.MSG_PONG)
        if frame.msg_type == frames.MSG_COLLECT:
            region = self._attach()
            if region is None:
                return frames.Frame(frames.MSG_NACK, bytes([frames.NACK_NO_REGION]))
            cells = np.frombuffer(region.snapshot(), dtype=np.uint8).copy()
            kernels.classify_inplace(cells)
            return frames.encode_coverage(self.channel_id, region.size_m, cells.tobytes())
        if frame.msg_type == frames.MSG_RESET:
            region = self._attach()
            if region is None:
                return frames.Frame(frames.MSG_NACK, bytes([frames.NACK_NO_REGION]))
            region.zero_cells()
            return frames.Frame(frames.MSG_ACK)
        if frame.msg_type == frames.MSG_STATUS:
            region = self._attach()
            if region is None:
                return frames.encode_status_reply(self.channel_id, False, 0)
            return frames.encode_status_reply(self.channel_id, True, region.restart_count)
        return frames.Frame(frames.MSG_NACK, bytes([frames.NACK_BAD_TYPE]))

    # -- serving -------------------------------------------------------------

    def bind(self) -> int:
        """Bind the listener; returns the actual port (useful with port 0)."""
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.host, self.port))
        listener.listen(4)
        self._listener = listener
        self.port = listener.getsockname()[1]
        return self.port

    def serve_forever(self, stop: threading.Event | None = None) -> None:
        if self._listener is None:
            self.bind()
        self._listener.settimeout(0.2)
        try:
            while stop is None or not stop.is_set():
                try:
                    conn, _ = self._listener.accept()
                except socket.timeout:
                    continue
                try:
                    self._serve_connection(conn, stop)
                finally:
                    conn.close()
        finally:
            self._listener.close()
            if self._region is not None:
                self._region.close()
                self._region = None

    def _serve_connection(self, conn: socket.socket, stop: threading.Event | None) -> None:
        while stop is None or not stop.is_set():
            try:
                request = frames.read_frame(conn, timeout_s=0.5)
            except TimeoutError:
                continue
            except (ConnectionError, OSError):
                return
            except ProtocolError:
                # Unreadable stream: drop the connection rather than guess
                # at framing.
                return
            try:
                frames.write_frame(conn, self.handle_frame(request))
            except (ConnectionError, OSError):
                return


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="coverage collector service")
    parser.add_argument("--region", required=True)
    parser.add_argument("--listen", type=int, required=True)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--channel", type=int, required=True)
    args = parser.parse_args(argv)
    service = CollectorService(args.region, args.host, args.listen, args.channel)
    service.bind()
    service.serve_forever()
    return 0


if __name__ == "__main__":
    sys.exit(main())
