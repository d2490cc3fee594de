"""Shared coverage regions.

A region is a memory-mapped file holding one component's edge counters:

    offset 0   "MCOV"            magic
    offset 4   u8  version       0x01
    offset 5   u8  channel_id
    offset 6   u16 restart_count (little-endian, bumped by the launcher)
    offset 8   u32 size_m
    offset 12  u32 generation    (bumped by the component at message
                                  boundaries; snapshot consistency check)
    offset 16  size_m counter bytes

Components write counters and the generation; the launcher creates and
re-zeroes regions; collectors and the fuzzer read snapshots. Stdlib-only so
target components stay cheap to restart.
"""

import mmap
import os
import struct

from meshfuzz.errors import ConfigError, ProtocolError

MAGIC = b"MCOV"
VERSION = 0x01
HEADER = struct.Struct("<4sBBHII")
HEADER_SIZE = 16

assert HEADER.size == HEADER_SIZE


def create_region(path: str, channel_id: int, size_m: int) -> None:
    """Create (or recreate) a zeroed region file."""
    if size_m < 1:
        raise ConfigError("size_m must be positive")
    header = HEADER.pack(MAGIC, VERSION, channel_id, 0, size_m, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(b"\x00" * size_m)


class Region:
    """Memory-mapped view of a region file."""

    def __init__(self, path: str):
        if not os.path.exists(path):
            raise FileNotFoundError(path)
        self._fh = open(path, "r+b")
        self._mm = mmap.mmap(self._fh.fileno(), 0)
        magic, version, channel_id, _, size_m, _ = HEADER.unpack_from(self._mm, 0)
        if magic != MAGIC:
            raise ProtocolError(f"{path}: bad region magic {magic!r}")
        if version != VERSION:
            raise ProtocolError(f"{path}: unsupported region version {version}")
        if len(self._mm) != HEADER_SIZE + size_m:
            raise ProtocolError(f"{path}: file size does not match size_m {size_m}")
        self.path = path
        self.channel_id = channel_id
        self.size_m = size_m

    # -- header fields ------------------------------------------------------

    @property
    def generation(self) -> int:
        return struct.unpack_from("<I", self._mm, 12)[0]

    def bump_generation(self) -> None:
        gen = (self.generation + 1) & 0xFFFFFFFF
        struct.pack_into("<I", self._mm, 12, gen)

    @property
    def restart_count(self) -> int:
        return struct.unpack_from("<H", self._mm, 6)[0]

    def set_restart_count(self, count: int) -> None:
        struct.pack_into("<H", self._mm, 6, count & 0xFFFF)

    # -- counter cells ------------------------------------------------------

    def record_edge(self, edge_id: int) -> None:
        """Saturating increment of one edge counter."""
        off = HEADER_SIZE + edge_id
        cur = self._mm[off]
        if cur < 255:
            self._mm[off] = cur + 1

    def read_cells(self) -> bytes:
        return self._mm[HEADER_SIZE:HEADER_SIZE + self.size_m]

    def snapshot(self) -> bytes:
        """Copy the cells with a generation consistency check (one retry)."""
        for _ in range(2):
            gen_before = self.generation
            cells = self.read_cells()
            if self.generation == gen_before:
                return cells
        return cells

    def zero_cells(self) -> None:
        self._mm[HEADER_SIZE:HEADER_SIZE + self.size_m] = b"\x00" * self.size_m

    def close(self) -> None:
        self._mm.close()
        self._fh.close()

    def __enter__(self) -> "Region":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
