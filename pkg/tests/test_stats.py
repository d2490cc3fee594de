"""Stats CSV writer, monotonicity checks, and multi-run aggregation."""

import pytest

from meshfuzz.errors import ConfigError
from meshfuzz.fuzzcore.stats import (StatsWriter, check_monotonic, read_stats_csv,
                                     stat_columns, summarize)


def test_column_order():
    assert stat_columns(2) == [
        "elapsed_s", "execs", "execs_per_s", "edges_ch0", "edges_ch1",
        "rate_ch0", "rate_ch1", "corpus", "unique_crashes", "total_crashes"]


def write_run(path, rows):
    writer = StatsWriter(str(path), n_channels=2, interval_s=1.0)
    for elapsed, execs, edges, corpus, uniq, total in rows:
        writer.emit(elapsed, execs, edges, corpus, uniq, total)
    writer.close()


def test_writer_emits_rows(tmp_path):
    path = tmp_path / "s.csv"
    write_run(path, [
        (5.0, 100, [10, 3], 4, 0, 0),
        (10.0, 260, [15, 3], 6, 1, 2),
    ])
    header, rows = read_stats_csv(str(path))
    assert header == stat_columns(2)
    assert len(rows) == 2
    assert rows[0][0] == pytest.approx(5.0)
    assert rows[0][2] == pytest.approx(20.0)    # 100 execs over 5s
    assert rows[1][2] == pytest.approx(32.0)    # 160 execs over 5s
    assert rows[1][5] == pytest.approx(1.0)     # 5 new ch0 edges over 5s
    assert rows[1][6] == pytest.approx(0.0)


def test_due_respects_interval(tmp_path):
    writer = StatsWriter(str(tmp_path / "s.csv"), 1, interval_s=5.0)
    assert not writer.due(4.9)
    assert writer.due(5.0)
    writer.close()


def test_check_monotonic_accepts_good_file(tmp_path):
    path = tmp_path / "ok.csv"
    write_run(path, [
        (5.0, 10, [1, 1], 1, 0, 0),
        (10.0, 30, [2, 1], 1, 0, 0),
        (15.0, 60, [2, 5], 2, 1, 1),
    ])
    result = check_monotonic(str(path))
    assert result.ok, result.problems


def test_check_monotonic_catches_regressions(tmp_path):
    path = tmp_path / "bad.csv"
    lines = [",".join(stat_columns(1)),
             "5.0,10,2.0,7,1.4,1,0,0",
             "10.0,20,2.0,5,0.0,1,0,0"]   # edges_ch0 drops 7 -> 5
    path.write_text("\n".join(lines) + "\n")
    result = check_monotonic(str(path))
    assert not result.ok
    assert any("edges_ch0" in p for p in result.problems)


def test_summarize_bounds(tmp_path):
    paths = []
    for run in range(5):
        path = tmp_path / f"run{run}.csv"
        rows = []
        execs = 0
        edges = 0
        for step in range(1, 6):
            execs += 50 + 10 * run
            edges += run + 1
            rows.append((5.0 * step, execs, [edges, edges * 2], run + 1, 0, run))
        write_run(path, rows)
        paths.append(str(path))
    header, rows = summarize(paths, bucket_s=5.0)
    assert header[0] == "bucket_s" and header[1] == "runs"
    col = header.index("execs_mean")
    for row in rows:
        mean_v, min_v, max_v = row[col], row[col + 1], row[col + 2]
        assert min_v <= mean_v <= max_v

    assert all(row[1] == 5 for row in rows)


def test_summarize_rejects_mismatched_headers(tmp_path):
    a = tmp_path / "a.csv"
    write_run(a, [(5.0, 10, [1, 1], 1, 0, 0)])
    b = tmp_path / "b.csv"
    writer = StatsWriter(str(b), n_channels=1, interval_s=1.0)
    writer.emit(5.0, 10, [1], 1, 0, 0)
    writer.close()
    with pytest.raises(ConfigError):
        summarize([str(a), str(b)])


def test_summarize_requires_input():
    with pytest.raises(ConfigError):
        summarize([])
