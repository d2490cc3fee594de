"""Campaign statistics: periodic CSV rows and multi-run aggregation.

Column order (fixed): elapsed_s, execs, execs_per_s, edges_ch0..edges_chN,
rate_ch0..rate_chN, corpus, unique_crashes, total_crashes. rate_chX is the
number of edges newly covered on channel X during the interval divided by
the interval length (edges per second).
"""

import csv
import os
from dataclasses import dataclass

from meshfuzz.errors import ConfigError


def stat_columns(n_channels: int) -> list[str]:
    return (["elapsed_s", "execs", "execs_per_s"]
            + [f"edges_ch{i}" for i in range(n_channels)]
            + [f"rate_ch{i}" for i in range(n_channels)]
            + ["corpus", "unique_crashes", "total_crashes"])


class StatsWriter:
    """Append-only CSV sink; one row per stats interval.

    An unwritable sink raises at construction or on the first row, which
    aborts the campaign.
    """

    def __init__(self, path: str, n_channels: int, interval_s: float):
        self.path = path
        self.n_channels = n_channels
        self.interval_s = interval_s
        self.columns = stat_columns(n_channels)
        self._last_elapsed = 0.0
        self._last_execs = 0
        self._last_edges = [0] * n_channels
        self._rows = 0
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        self._fh = open(path, "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(self.columns)
        self._fh.flush()

    def due(self, elapsed_s: float) -> bool:
        return elapsed_s - self._last_elapsed >= self.interval_s

    def emit(self, elapsed_s: float, execs: int, edges: list[int],
             corpus: int, unique_crashes: int, total_crashes: int) -> None:
        interval = elapsed_s - self._last_elapsed
        if interval <= 0:
            return
        execs_per_s = (execs - self._last_execs) / interval
        rates = [(edges[i] - self._last_edges[i]) / interval
                 for i in range(self.n_channels)]
        row = ([f"{elapsed_s:.3f}", execs, f"{execs_per_s:.2f}"]
               + list(edges)
               + [f"{r:.4f}" for r in rates]
               + [corpus, unique_crashes, total_crashes])
        self._writer.writerow(row)
        self._fh.flush()
        self._last_elapsed = elapsed_s
        self._last_execs = execs
        self._last_edges = list(edges)
        self._rows += 1

    @property
    def rows_written(self) -> int:
        return self._rows

    def close(self) -> None:
        self._fh.close()


def read_stats_csv(path: str) -> tuple[list[str], list[list[float]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(cell) for cell in row] for row in reader if row]
    return header, rows


def summarize(paths: list[str], bucket_s: float | None = None
              ) -> tuple[list[str], list[list[float]]]:
    """Aggregate several runs' stats files into per-time-bucket min/mean/max.

    Rows from every file are grouped by elapsed-time bucket; within a bucket
    each run contributes its last row, and each column is reported three
    times (mean, min, max) plus the number of contributing runs.
    """
    if not paths:
        raise ConfigError("no stats files given")
    headers_rows = [read_stats_csv(p) for p in paths]
    header = headers_rows[0][0]
    for path, (other_header, _) in zip(paths, headers_rows):
        if other_header != header:
            raise ConfigError(f"{path}: column mismatch with {paths[0]}")
    if bucket_s is None:
        bucket_s = _default_bucket(headers_rows[0][1])

    # bucket -> run index -> last row in that bucket
    per_bucket: dict[int, dict[int, list[float]]] = {}
    for run_idx, (_, rows) in enumerate(headers_rows):
        for row in rows:
            bucket = int(row[0] // bucket_s)
            per_bucket.setdefault(bucket, {})[run_idx] = row

    value_cols = header[1:]
    out_header = ["bucket_s", "runs"]
    for col in value_cols:
        out_header += [f"{col}_mean", f"{col}_min", f"{col}_max"]

    out_rows = []
    for bucket in sorted(per_bucket):
        contributions = list(per_bucket[bucket].values())
        out_row: list[float] = [bucket * bucket_s, len(contributions)]
        for col_idx in range(1, len(header)):
            values = [row[col_idx] for row in contributions]
            out_row += [sum(values) / len(values), min(values), max(values)]
        out_rows.append(out_row)
    return out_header, out_rows


def _default_bucket(rows: list[list[float]]) -> float:
    if len(rows) >= 2:
        return max(rows[1][0] - rows[0][0], 1e-9)
    return max((rows[0][0] if rows else 1.0), 1e-9)


@dataclass
class StatsCheck:
    ok: bool
    problems: list[str]


def check_monotonic(path: str) -> StatsCheck:
    """Validate the invariants every emitted stats file must satisfy."""
    header, rows = read_stats_csv(path)
    problems = []
    edge_cols = [i for i, name in enumerate(header) if name.startswith("edges_ch")]
    exec_col = header.index("execs")
    for prev, cur in zip(rows, rows[1:]):
        if cur[0] <= prev[0]:
            problems.append(f"elapsed_s not strictly increasing at {cur[0]}")
        if cur[exec_col] <= prev[exec_col]:
            problems.append(f"execs not strictly increasing at {cur[0]}")
        for col in edge_cols:
            if cur[col] < prev[col]:
                problems.append(f"{header[col]} decreased at {cur[0]}")
    return StatsCheck(not problems, problems)
