"""Crash recording, deduplication, and offline triage.

Crashes are deduplicated by (channel_id, crash_site_id) - the site id plays
the role a sanitizer-reported fault address would on a real target. During
a campaign every event is appended to events.jsonl, the first witness
sequence per dedup key is saved next to it, and the aggregated table is
written to records.json at exit.
"""

import json
import os
import sys
from dataclasses import asdict, dataclass

from meshfuzz.mccm.launcher import CrashEvent
from meshfuzz.mutation import MessageSequence, serialize_corpus

EVENTS_FILE = "events.jsonl"
RECORDS_FILE = "records.json"


@dataclass
class CrashRecord:
    channel_id: int
    component: str
    site_id: int
    first_seen: float
    count: int
    witness_file: str
    token: str
    exit_desc: str

    @property
    def dedup_key(self) -> tuple[int, int]:
        return (self.channel_id, self.site_id)


class CrashTable:
    """In-campaign dedup table with on-disk artifacts."""

    def __init__(self, crash_dir: str):
        self.crash_dir = crash_dir
        os.makedirs(crash_dir, exist_ok=True)
        self.records: dict[tuple[int, int], CrashRecord] = {}
        self.total_events = 0
        self._events_fh = open(os.path.join(crash_dir, EVENTS_FILE), "a",
                               encoding="utf-8")

    def add(self, event: CrashEvent, witness: MessageSequence,
            elapsed_s: float) -> bool:
        """Record one crash event; returns True when the dedup key is new."""
        key = (event.channel_id, event.site_id)
        self.total_events += 1
        is_new = key not in self.records
        if is_new:
            witness_file = f"witness_ch{event.channel_id}_site{event.site_id}.mcsq"
            with open(os.path.join(self.crash_dir, witness_file), "wb") as fh:
                fh.write(serialize_corpus(witness))
            self.records[key] = CrashRecord(
                channel_id=event.channel_id, component=event.name,
                site_id=event.site_id, first_seen=elapsed_s, count=1,
                witness_file=witness_file, token=event.token,
                exit_desc=event.exit_desc)
        else:
            self.records[key].count += 1
        self._events_fh.write(json.dumps({
            "elapsed_s": elapsed_s, "channel_id": event.channel_id,
            "component": event.name, "site_id": event.site_id,
            "token": event.token, "exit": event.exit_desc,
            "testcase_index": event.testcase_index,
        }) + "\n")
        self._events_fh.flush()
        return is_new

    @property
    def unique_count(self) -> int:
        return len(self.records)

    def rows(self) -> list[CrashRecord]:
        return sorted(self.records.values(), key=lambda r: r.first_seen)

    def write_records(self) -> str:
        path = os.path.join(self.crash_dir, RECORDS_FILE)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump([asdict(r) for r in self.rows()], fh, indent=2)
        return path

    def close(self) -> None:
        self.write_records()
        self._events_fh.close()


def triage_dedup(event_dicts) -> list[CrashRecord]:
    """Group raw crash events by (channel, site), keeping the earliest
    first_seen. Malformed entries are skipped with a warning."""
    records: dict[tuple[int, int], CrashRecord] = {}
    for entry in event_dicts:
        try:
            key = (int(entry["channel_id"]), int(entry["site_id"]))
            elapsed = float(entry["elapsed_s"])
            component = str(entry.get("component", f"channel{key[0]}"))
        except (KeyError, TypeError, ValueError) as exc:
            print(f"warning: skipping malformed crash entry: {exc}", file=sys.stderr)
            continue
        record = records.get(key)
        if record is None:
            records[key] = CrashRecord(
                channel_id=key[0], component=component, site_id=key[1],
                first_seen=elapsed, count=1, witness_file="",
                token=str(entry.get("token", "")),
                exit_desc=str(entry.get("exit", "")))
        else:
            record.count += 1
            if elapsed < record.first_seen:
                record.first_seen = elapsed
    return sorted(records.values(), key=lambda r: r.first_seen)


def load_events(crash_dir: str):
    """Yield event dicts from events.jsonl, skipping unreadable lines."""
    path = os.path.join(crash_dir, EVENTS_FILE)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                print(f"warning: {path}:{lineno}: unparseable line skipped",
                      file=sys.stderr)


def format_table(records: list[CrashRecord]) -> str:
    """Discovery-time table, one row per deduplicated crash."""
    lines = [f"{'component':<10} {'site':>8} {'count':>7} {'first_seen_s':>13} witness"]
    for r in records:
        lines.append(f"{r.component:<10} {r.site_id:>8} {r.count:>7} "
                     f"{r.first_seen:>13.2f} {r.witness_file or '-'}")
    return "\n".join(lines)
