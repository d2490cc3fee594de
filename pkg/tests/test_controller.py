"""Controller fan-out, degraded channels, and snapshot fidelity."""

import socket
import threading

import pytest

from meshfuzz.coverage import BUCKET_TABLE, CoverageMap
from meshfuzz.errors import ProtocolError
from meshfuzz.mccm import frames
from meshfuzz.mccm.collector import CollectorService
from meshfuzz.mccm.controller import CollectorEndpoint, Controller, MissingChannel
from meshfuzz.mccm.region import Region, create_region


@pytest.fixture
def two_collectors(tmp_path):
    services = []
    endpoints = []
    stops = []
    threads = []
    regions = {}
    for channel_id in (1, 2):
        region_path = str(tmp_path / f"ch{channel_id}.cov")
        create_region(region_path, channel_id, 128)
        svc = CollectorService(region_path, "127.0.0.1", 0, channel_id)
        port = svc.bind()
        stop = threading.Event()
        thread = threading.Thread(target=svc.serve_forever, args=(stop,), daemon=True)
        thread.start()
        services.append(svc)
        stops.append(stop)
        threads.append(thread)
        regions[channel_id] = region_path
        endpoints.append(CollectorEndpoint(channel_id, "127.0.0.1", port,
                                           region_path, timeout_ms=500))
    controller = Controller()
    yield controller, endpoints, regions
    controller.close()
    for stop in stops:
        stop.set()
    for thread in threads:
        thread.join(timeout=2.0)


def test_collect_all_empty(two_collectors):
    controller, endpoints, _ = two_collectors
    results = controller.collect(endpoints, reason="test")
    assert set(results) == {1, 2}
    for channel_id, cov in results.items():
        assert isinstance(cov, CoverageMap)
        assert cov.classified
        assert not cov.cells.any()


def test_snapshot_fidelity(two_collectors):
    controller, endpoints, regions = two_collectors
    with Region(regions[1]) as region:
        for _ in range(40):
            region.record_edge(7)   # 40 hits -> bucket 7
        region.record_edge(100)     # 1 hit -> bucket 1
    results = controller.collect(endpoints, reason="test")
    cov = results[1]
    assert cov.cells[7] == BUCKET_TABLE[40] == 7
    assert cov.cells[100] == 1
    assert results[2].cells.sum() == 0


def test_one_collector_unreachable(two_collectors):
    controller, endpoints, _ = two_collectors
    dead = CollectorEndpoint(3, "127.0.0.1", _unused_port(), "none", timeout_ms=100)
    results = controller.collect(endpoints + [dead], reason="degraded")
    assert isinstance(results[3], MissingChannel)
    assert isinstance(results[1], CoverageMap)
    assert isinstance(results[2], CoverageMap)
    assert controller.request_log[-1].missing == (3,)


def test_reset_round_trip(two_collectors):
    controller, endpoints, regions = two_collectors
    with Region(regions[2]) as region:
        region.record_edge(5)
    flags = controller.reset(endpoints)
    assert flags == {1: True, 2: True}
    results = controller.collect(endpoints, reason="after-reset")
    assert not results[2].cells.any()


def test_request_log_reasons(two_collectors):
    controller, endpoints, _ = two_collectors
    controller.collect(endpoints, reason="new-main-bits")
    controller.collect(endpoints, reason="sweep")
    reasons = [entry.reason for entry in controller.request_log]
    assert reasons == ["new-main-bits", "sweep"]


def test_malformed_reply_names_endpoint():
    # a scripted "collector" that answers COLLECT with a corrupt COVERAGE
    listener = socket.socket()
    listener.bind(("127.0.0.1", 0))
    listener.listen(1)
    port = listener.getsockname()[1]

    def bad_server():
        conn, _ = listener.accept()
        frames.read_frame(conn, 1.0)
        good = frames.encode_coverage(9, 16, b"\x00" * 16)
        frames.write_frame(conn, frames.Frame(good.msg_type, good.payload[:-2]))
        conn.close()

    thread = threading.Thread(target=bad_server, daemon=True)
    thread.start()
    controller = Controller()
    endpoint = CollectorEndpoint(9, "127.0.0.1", port, "x", timeout_ms=500)
    with pytest.raises(ProtocolError) as err:
        controller.collect([endpoint], reason="test")
    assert f"127.0.0.1:{port}" in str(err.value)
    controller.close()
    listener.close()
    thread.join(timeout=1.0)


def test_wrong_channel_in_reply_is_protocol_error():
    listener = socket.socket()
    listener.bind(("127.0.0.1", 0))
    listener.listen(1)
    port = listener.getsockname()[1]

    def wrong_channel_server():
        conn, _ = listener.accept()
        frames.read_frame(conn, 1.0)
        frames.write_frame(conn, frames.encode_coverage(5, 8, b"\x00" * 8))
        conn.close()

    thread = threading.Thread(target=wrong_channel_server, daemon=True)
    thread.start()
    controller = Controller()
    endpoint = CollectorEndpoint(4, "127.0.0.1", port, "x", timeout_ms=500)
    with pytest.raises(ProtocolError):
        controller.collect([endpoint], reason="test")
    controller.close()
    listener.close()
    thread.join(timeout=1.0)


def test_echo_snapshot_byte_exact():
    # scripted collector echoes a fixed classified payload; the controller
    # must hold exactly those bytes
    payload = bytes((i * 7) % 8 for i in range(64))
    listener = socket.socket()
    listener.bind(("127.0.0.1", 0))
    listener.listen(1)
    port = listener.getsockname()[1]

    def echo_server():
        conn, _ = listener.accept()
        frames.read_frame(conn, 1.0)
        frames.write_frame(conn, frames.encode_coverage(6, 64, payload))
        conn.close()

    thread = threading.Thread(target=echo_server, daemon=True)
    thread.start()
    controller = Controller()
    endpoint = CollectorEndpoint(6, "127.0.0.1", port, "x", timeout_ms=500)
    results = controller.collect([endpoint], reason="echo")
    assert results[6].cells.tobytes() == payload
    controller.close()
    listener.close()
    thread.join(timeout=1.0)


def test_endpoint_timeout_floor():
    with pytest.raises(Exception):
        CollectorEndpoint(0, "h", 1, "r", timeout_ms=5)


def _unused_port():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]
