"""Shared coverage region files."""

import pytest

from meshfuzz.errors import ProtocolError
from meshfuzz.mccm.region import HEADER_SIZE, Region, create_region


@pytest.fixture
def region(tmp_path):
    path = str(tmp_path / "chan.cov")
    create_region(path, channel_id=2, size_m=256)
    with Region(path) as reg:
        yield reg


def test_header_fields(region):
    assert region.channel_id == 2
    assert region.size_m == 256
    assert region.generation == 0
    assert region.restart_count == 0


def test_file_size(tmp_path):
    path = str(tmp_path / "r.cov")
    create_region(path, 0, 128)
    assert (tmp_path / "r.cov").stat().st_size == HEADER_SIZE + 128


def test_record_edge_and_saturation(region):
    region.record_edge(7)
    assert region.read_cells()[7] == 1
    for _ in range(300):
        region.record_edge(7)
    assert region.read_cells()[7] == 255


def test_generation_bumps(region):
    region.bump_generation()
    region.bump_generation()
    assert region.generation == 2


def test_zero_cells_keeps_header(region):
    region.record_edge(3)
    region.bump_generation()
    region.zero_cells()
    assert not any(region.read_cells())
    assert region.generation == 1
    assert region.channel_id == 2


def test_restart_count_round_trip(region):
    region.set_restart_count(5)
    assert region.restart_count == 5


def test_snapshot_matches_cells(region):
    for edge in (1, 5, 9):
        region.record_edge(edge)
    snap = region.snapshot()
    assert snap == region.read_cells()


def test_reattach_sees_same_data(tmp_path):
    path = str(tmp_path / "shared.cov")
    create_region(path, 1, 64)
    with Region(path) as writer:
        writer.record_edge(10)
        with Region(path) as reader:
            assert reader.read_cells()[10] == 1


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.cov"
    path.write_bytes(b"NOPE" + b"\x00" * 60)
    with pytest.raises(ProtocolError):
        Region(str(path))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        Region(str(tmp_path / "absent.cov"))
