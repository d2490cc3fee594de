"""Embedded single-process target harness.

Wires the entry component to its three downstreams with direct in-process
links over temporary region files: no sockets, no subprocesses. Crashes
surface as SimulatedCrash exceptions. Used by unit tests, the selftest
suite, and hand-traced state-table oracles.
"""

import os
import tempfile

from meshfuzz.mccm.region import Region, create_region
from meshfuzz.sutsim.component import (ConfigStore, EntryComponent, InProcessLink,
                                       Registry, SessionManager)
from meshfuzz.sutsim import tlv


class EmbeddedTarget:
    def __init__(self, defects: frozenset = frozenset(), size_m: int = 4096,
                 crash_log: str | None = None):
        self._tmp = tempfile.TemporaryDirectory(prefix="meshfuzz-embedded-")
        self.size_m = size_m
        self.regions: dict[str, Region] = {}
        for channel_id, name in enumerate(("entry", "manager", "registry", "config")):
            path = os.path.join(self._tmp.name, f"{name}.cov")
            create_region(path, channel_id, size_m)
            self.regions[name] = Region(path)
        kwargs = dict(defects=defects, crash_log=crash_log, crash_mode="raise")
        self.manager = SessionManager(self.regions["manager"], **kwargs)
        self.registry = Registry(self.regions["registry"], **kwargs)
        self.config_store = ConfigStore(self.regions["config"], **kwargs)
        self.entry = EntryComponent(
            self.regions["entry"],
            links={"a": InProcessLink(self.manager),
                   "b": InProcessLink(self.registry),
                   "c": InProcessLink(self.config_store)},
            **kwargs)

    # -- driving ------------------------------------------------------------

    def send(self, message: bytes) -> bytes:
        """Deliver one framed message to the entry; returns its reply.
        Raises SimulatedCrash when a planted defect fires."""
        return self.entry.handle(message)

    def send_sequence(self, messages: list[bytes]) -> list[bytes]:
        return [self.send(m) for m in messages]

    def reset_session(self, token: bytes = b"t") -> bytes:
        return self.send(tlv.pack_tlv(tlv.MSG_SESSION_RESET, token))

    # -- inspection ----------------------------------------------------------

    def edges(self, name: str) -> dict[int, int]:
        """Nonzero raw edge counters of one component's region."""
        cells = self.regions[name].read_cells()
        return {i: c for i, c in enumerate(cells) if c}

    def entry_edges(self) -> dict[int, int]:
        return self.edges("entry")

    def reset_regions(self) -> None:
        for region in self.regions.values():
            region.zero_cells()

    # -- lifecycle -----------------------------------------------------------

    def close(self) -> None:
        for region in self.regions.values():
            region.close()
        self._tmp.cleanup()

    def __enter__(self) -> "EmbeddedTarget":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
