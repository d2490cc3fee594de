"""Collector service behavior (threaded service + one subprocess test)."""

import socket
import subprocess
import sys
import threading
import time

import numpy as np
import pytest

from meshfuzz.coverage import BUCKET_TABLE
from meshfuzz.mccm import frames
from meshfuzz.mccm.collector import CollectorService
from meshfuzz.mccm.region import Region, create_region


@pytest.fixture
def service(tmp_path):
    region_path = str(tmp_path / "chan1.cov")
    create_region(region_path, channel_id=1, size_m=256)
    svc = CollectorService(region_path, "127.0.0.1", 0, channel_id=1)
    port = svc.bind()
    stop = threading.Event()
    thread = threading.Thread(target=svc.serve_forever, args=(stop,), daemon=True)
    thread.start()
    conn = socket.create_connection(("127.0.0.1", port), timeout=1.0)
    yield conn, region_path
    conn.close()
    stop.set()
    thread.join(timeout=2.0)


def roundtrip(conn, frame):
    frames.write_frame(conn, frame)
    return frames.read_frame(conn, timeout_s=1.0)


def test_ping_pong(service):
    conn, _ = service
    reply = roundtrip(conn, frames.Frame(frames.MSG_PING))
    assert reply.msg_type == frames.MSG_PONG


def test_collect_empty_region(service):
    conn, _ = service
    reply = roundtrip(conn, frames.Frame(frames.MSG_COLLECT))
    channel_id, size_m, cells = frames.decode_coverage(reply)
    assert (channel_id, size_m) == (1, 256)
    assert not any(cells)


def test_collect_applies_bucket_table(service):
    conn, region_path = service
    with Region(region_path) as region:
        region.record_edge(5)
        region.record_edge(5)
        region.record_edge(9)
    reply = roundtrip(conn, frames.Frame(frames.MSG_COLLECT))
    _, _, cells = frames.decode_coverage(reply)
    assert cells[5] == 2   # two hits -> bucket 2
    assert cells[9] == 1   # one hit -> bucket 1
    assert sum(1 for c in cells if c) == 2


def test_collect_fidelity_against_oracle(service):
    conn, region_path = service
    rng = np.random.default_rng(1)
    counts = rng.integers(0, 256, size=256, dtype=np.uint8)
    with Region(region_path) as region:
        region._mm[16:16 + 256] = counts.tobytes()
    reply = roundtrip(conn, frames.Frame(frames.MSG_COLLECT))
    _, _, cells = frames.decode_coverage(reply)
    expected = bytes(BUCKET_TABLE[c] for c in counts)
    assert cells == expected


def test_reset_then_collect_zero(service):
    conn, region_path = service
    with Region(region_path) as region:
        region.record_edge(3)
    reply = roundtrip(conn, frames.Frame(frames.MSG_RESET))
    assert reply.msg_type == frames.MSG_ACK
    reply = roundtrip(conn, frames.Frame(frames.MSG_COLLECT))
    _, _, cells = frames.decode_coverage(reply)
    assert not any(cells)


def test_status_reply(service):
    conn, region_path = service
    with Region(region_path) as region:
        region.set_restart_count(4)
    reply = roundtrip(conn, frames.Frame(frames.MSG_STATUS))
    channel_id, alive, restarts = frames.decode_status_reply(reply)
    assert (channel_id, alive, restarts) == (1, True, 4)


def test_unknown_type_nack():
    svc = CollectorService("/nonexistent", "127.0.0.1", 0, channel_id=0)
    reply = svc.handle_frame(frames.Frame(frames.MSG_PONG))
    assert reply.msg_type == frames.MSG_NACK
    assert reply.payload == bytes([frames.NACK_BAD_TYPE])


def test_missing_region_nack():
    svc = CollectorService("/nonexistent/region.cov", "127.0.0.1", 0, channel_id=0)
    for request in (frames.MSG_COLLECT, frames.MSG_RESET):
        reply = svc.handle_frame(frames.Frame(request))
        assert reply.msg_type == frames.MSG_NACK
        assert reply.payload == bytes([frames.NACK_NO_REGION])
    reply = svc.handle_frame(frames.Frame(frames.MSG_STATUS))
    assert frames.decode_status_reply(reply) == (0, False, 0)


def test_subprocess_collector(tmp_path):
    region_path = str(tmp_path / "sub.cov")
    create_region(region_path, channel_id=2, size_m=64)
    port = _free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "meshfuzz.mccm.collector", "--region", region_path,
         "--listen", str(port), "--channel", "2"],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    try:
        conn = _connect_retry(port)
        reply = roundtrip(conn, frames.Frame(frames.MSG_PING))
        assert reply.msg_type == frames.MSG_PONG
        reply = roundtrip(conn, frames.Frame(frames.MSG_COLLECT))
        assert frames.decode_coverage(reply)[0] == 2
        conn.close()
    finally:
        proc.terminate()
        proc.wait(timeout=2.0)


def _free_port():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def _connect_retry(port, attempts=50):
    for _ in range(attempts):
        try:
            return socket.create_connection(("127.0.0.1", port), timeout=0.5)
        except OSError:
            time.sleep(0.05)
    raise ConnectionError(f"collector on port {port} never came up")
