"""Coverage bitmaps, bucket classification, and new-bit detection.

Each feedback channel owns a fixed-size array of 8-bit cells indexed by edge
id. While a test case runs, cells count edge hits (saturating at 255); after
classification each cell holds a bucket index 0-7. A channel's VirginState
accumulates every (edge, bucket) observation seen during the campaign, and
"new bits" means that record grew.
"""

from dataclasses import dataclass, field

import numpy as np

from meshfuzz import kernels
from meshfuzz.errors import ConfigError

DEFAULT_MAP_SIZE = 65536
MIN_MAP_SIZE = 64


def bucket_for_count(count: int) -> int:
    """Piecewise bucket table for a single saturated hit count."""
    if count <= 0:
        return 0
    if count == 1:
        return 1
    if count == 2:
        return 2
    if count <= 4:
        return 3
    if count <= 8:
        return 4
    if count <= 16:
        return 5
    if count <= 32:
        return 6
    return 7


#: Raw hit count -> bucket index, exported for oracles and the simulator.
BUCKET_TABLE = tuple(bucket_for_count(h) for h in range(256))


def _check_size(size_m: int) -> None:
    if size_m < MIN_MAP_SIZE or size_m & (size_m - 1):
        raise ConfigError(f"map size must be a power of two >= {MIN_MAP_SIZE}, got {size_m}")


class CoverageMap:
    """Per-channel edge hit counters (raw mode) or bucket values (classified)."""

    __slots__ = ("channel_id", "size_m", "cells", "classified")

    def __init__(self, channel_id: int, size_m: int = DEFAULT_MAP_SIZE,
                 cells: np.ndarray | None = None, classified: bool = False):
        _check_size(size_m)
        self.channel_id = channel_id
        self.size_m = size_m
        if cells is None:
            cells = np.zeros(size_m, dtype=np.uint8)
        elif cells.shape != (size_m,) or cells.dtype != np.uint8:
            raise ConfigError("cells array must be uint8 of length size_m")
        self.cells = cells
        self.classified = classified

    @classmethod
    def from_bytes(cls, channel_id: int, raw: bytes, classified: bool = False) -> "CoverageMap":
        cells = np.frombuffer(raw, dtype=np.uint8).copy()
        return cls(channel_id, len(cells), cells, classified)

    def record(self, edge_id: int) -> None:
        """Saturating hit-count increment (slow path; the simulator records
        through its shared region instead)."""
        if self.classified:
            raise ConfigError("cannot record into a classified map")
        cur = int(self.cells[edge_id])
        if cur < 255:
            self.cells[edge_id] = cur + 1


class VirginState:
    """Accumulated (edge, bucket) observations for one channel.

    masks[e] bit b is set once bucket b has ever been seen for edge e; bits
    are never cleared within a campaign.
    """

    __slots__ = ("channel_id", "size_m", "masks")

    def __init__(self, channel_id: int, size_m: int = DEFAULT_MAP_SIZE):
        _check_size(size_m)
        self.channel_id = channel_id
        self.size_m = size_m
        self.masks = np.zeros(size_m, dtype=np.uint8)


@dataclass(frozen=True)
class ChannelGain:
    """Normalized coverage gain of one execution on one channel."""

    channel_id: int
    new_edges: int
    gain: float


@dataclass(frozen=True)
class ChannelSpec:
    """Descriptor of one feedback channel."""

    channel_id: int
    name: str
    alpha: float
    collector_address: tuple[str, int] | None = None


@dataclass
class ChannelSet:
    """Ordered channel descriptors; channel 0 is the entry component's."""

    channels: list[ChannelSpec] = field(default_factory=list)

    def __post_init__(self):
        if not self.channels:
            raise ConfigError("at least one channel required")
        ids = [c.channel_id for c in self.channels]
        if ids != list(range(len(ids))):
            raise ConfigError(f"channel ids must be dense from 0, got {ids}")

    @property
    def n(self) -> int:
        return len(self.channels)

    @property
    def main_channel(self) -> ChannelSpec:
        return self.channels[0]

    @property
    def alphas(self) -> tuple[float, ...]:
        return tuple(c.alpha for c in self.channels)


def classify_counts(cov_map: CoverageMap) -> CoverageMap:
    """Classify raw hit counts into buckets, in place.

    Idempotent: classifying an already-classified map leaves it unchanged.
    """
    if not cov_map.classified:
        kernels.classify_inplace(cov_map.cells)
        cov_map.classified = True
    return cov_map


def has_new_bits(cov_map: CoverageMap, virgin: VirginState) -> tuple[bool, ChannelGain]:
    """Fold a classified map into the virgin state.

    Returns (novel, gain) where novel is True iff at least one (edge, bucket)
    observation is new and gain = new_edges / size_m.
    """
    if not cov_map.classified:
        raise ConfigError("has_new_bits requires a classified map")
    if cov_map.size_m != virgin.size_m:
        raise ConfigError(
            f"map/virgin size mismatch: {cov_map.size_m} != {virgin.size_m}")
    if cov_map.channel_id != virgin.channel_id:
        raise ConfigError(
            f"map/virgin channel mismatch: {cov_map.channel_id} != {virgin.channel_id}")
    new_edges = kernels.update_virgin(cov_map.cells, virgin.masks)
    gain = ChannelGain(cov_map.channel_id, new_edges, new_edges / cov_map.size_m)
    return new_edges > 0, gain


def zero_gain(channel_id: int) -> ChannelGain:
    """Gain of an execution that produced no new observations on a channel."""
    return ChannelGain(channel_id, 0, 0.0)


def count_covered_edges(virgin: VirginState) -> int:
    """Number of edges with at least one observed bucket."""
    return kernels.count_covered(virgin.masks)


def snapshot_reset(cov_map: CoverageMap) -> None:
    """Zero all cells and return the map to raw-recording mode."""
    cov_map.cells[:] = 0
    cov_map.classified = False
