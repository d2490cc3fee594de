"""Command-line interface.

Subcommands:
    fuzz            run a campaign against the bundled simulated target
    replay          execute one saved sequence and report what it did
    triage          deduplicate a campaign's crash events into a table
    stats summarize aggregate several runs' stats files (min/mean/max)
    selftest        run the built-in oracle suites

Exit codes: 0 ok, 2 config error, 3 target failure, 4 restart storm.
"""

import argparse
import csv
import sys

from meshfuzz.errors import ConfigError, MeshfuzzError, ParseError, RestartStormError, TargetError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TARGET = 3
EXIT_STORM = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshfuzz",
        description="coverage-guided fuzzer with per-component feedback channels")
    sub = parser.add_subparsers(dest="command", required=True)

    fuzz = sub.add_parser("fuzz", help="run a fuzzing campaign")
    fuzz.add_argument("--config", required=True, help="campaign config file")
    fuzz.add_argument("--mode", choices=["multi", "main-only"])
    fuzz.add_argument("--budget", type=float, metavar="SECONDS")
    fuzz.add_argument("--rng-seed", type=int, metavar="U64")

    replay = sub.add_parser("replay", help="replay one corpus file")
    replay.add_argument("seqfile")
    replay.add_argument("--config", required=True)

    triage = sub.add_parser("triage", help="deduplicate recorded crashes")
    triage.add_argument("crashdir")

    stats = sub.add_parser("stats", help="stats utilities")
    stats_sub = stats.add_subparsers(dest="stats_command", required=True)
    summarize = stats_sub.add_parser("summarize",
                                     help="aggregate runs into min/mean/max")
    summarize.add_argument("csvs", nargs="+")
    summarize.add_argument("--bucket", type=float, default=None,
                           help="bucket width in seconds (default: row spacing)")

    sub.add_parser("selftest", help="run the built-in oracle suites")
    return parser


def _cmd_fuzz(args) -> int:
    from meshfuzz.fuzzcore.campaign import Campaign
    from meshfuzz.fuzzcore.config import load_config

    config = load_config(args.config, mode=args.mode, budget_s=args.budget,
                         rng_seed=args.rng_seed)
    campaign = Campaign(config)
    try:
        campaign.start_target()
        try:
            summary = campaign.run()
        except KeyboardInterrupt:
            summary = campaign.summary("signal")
            print("interrupted; artifacts flushed", file=sys.stderr)
    finally:
        campaign.shutdown()
    print(f"done: {summary['execs']} execs in {summary['elapsed_s']}s "
          f"({summary['execs_per_s']}/s), corpus {summary['corpus_size']}, "
          f"unique crashes {summary['unique_crashes']} "
          f"[stop: {summary['stop_reason']}]")
    return EXIT_OK


def _cmd_replay(args) -> int:
    from meshfuzz.fuzzcore.campaign import Campaign
    from meshfuzz.fuzzcore.config import load_config
    from meshfuzz.mutation import deserialize_corpus

    with open(args.seqfile, "rb") as fh:
        sequence = deserialize_corpus(fh.read(), origin=args.seqfile)
    config = load_config(args.config)
    with Campaign(config) as campaign:
        report = campaign.replay_sequence(sequence)
    print(f"status: {report['status']}")
    for channel_id, new_edges in sorted(report["new_edges"].items()):
        print(f"channel {channel_id}: +{new_edges} edges")
    for i, response in enumerate(report["responses"]):
        print(f"response {i}: {response if response is not None else 'timeout'}")
    for crash in report["crash_sites"]:
        print(f"crash: component={crash['component']} site={crash['site_id']} "
              f"token={crash['token']}")
    if report["missing_channels"]:
        print(f"missing channels: {report['missing_channels']}")
    return EXIT_OK


def _cmd_triage(args) -> int:
    from meshfuzz.fuzzcore.triage import format_table, load_events, triage_dedup

    records = triage_dedup(load_events(args.crashdir))
    print(format_table(records))
    return EXIT_OK


def _cmd_stats(args) -> int:
    from meshfuzz.fuzzcore.stats import summarize

    header, rows = summarize(args.csvs, bucket_s=args.bucket)
    writer = csv.writer(sys.stdout)
    writer.writerow(header)
    for row in rows:
        writer.writerow([f"{v:.4f}" if isinstance(v, float) else v for v in row])
    return EXIT_OK


def _cmd_selftest() -> int:
    from meshfuzz.fuzzcore.selftest import run_selftest

    return EXIT_OK if run_selftest(sys.stdout) else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fuzz":
            return _cmd_fuzz(args)
        if args.command == "replay":
            return _cmd_replay(args)
        if args.command == "triage":
            return _cmd_triage(args)
        if args.command == "stats":
            return _cmd_stats(args)
        if args.command == "selftest":
            return _cmd_selftest()
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, ParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RestartStormError as exc:
        print(f"restart storm: {exc}", file=sys.stderr)
        return EXIT_STORM
    except TargetError as exc:
        print(f"target failure: {exc}", file=sys.stderr)
        return EXIT_TARGET
    except MeshfuzzError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TARGET
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
