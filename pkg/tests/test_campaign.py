"""End-to-end campaign behavior against the real subprocess deployment."""

import json
import os

import pytest

from meshfuzz.fuzzcore.campaign import Campaign
from meshfuzz.fuzzcore.stats import check_monotonic, read_stats_csv
from meshfuzz.mutation import MessageSequence, deserialize_corpus
from meshfuzz.sutsim import tlv
from meshfuzz.sutsim.defects import ALL_DEFECTS
from meshfuzz.sutsim.preset import shipped_seeds

REGISTER = tlv.pack_tlv(tlv.MSG_REGISTER, bytes([0x01]) + b"ue01")
D1_TRIGGER = bytes([0x10]) + (20).to_bytes(2, "little") + bytes([0x7F, 0x41])


def d1_sequence():
    return MessageSequence([D1_TRIGGER], origin="d1-trigger")


class TestExecuteTestcase:
    def test_first_register_is_novel_and_collected(self, make_config):
        with Campaign(make_config()) as campaign:
            campaign.warmup()
            outcome = campaign.execute_testcase(MessageSequence([REGISTER]))
            assert outcome.status == "ok"
            assert 0 in outcome.novel_channels
            assert outcome.collected
            assert outcome.collect_reason == "new-main-bits"
            assert outcome.record.gains[0].new_edges > 0

    def test_reset_only_after_warmup_scores_zero(self, make_config):
        with Campaign(make_config()) as campaign:
            campaign.warmup()
            reset_only = MessageSequence(
                [tlv.pack_tlv(tlv.MSG_SESSION_RESET, b"again")])
            outcome = campaign.execute_testcase(reset_only)
            assert outcome.status == "ok"
            assert outcome.novel_channels == ()
            assert all(g.gain == 0.0 for g in outcome.record.gains)

    def test_downstream_novelty_on_sweep(self, make_config):
        config = make_config(sweep_k=1)
        with Campaign(config) as campaign:
            campaign.warmup()
            campaign.execute_testcase(MessageSequence([REGISTER]))
            svc = tlv.pack_tlv(tlv.MSG_SERVICE, bytes([0x01, 0x02]))
            outcome = campaign.execute_testcase(
                MessageSequence([REGISTER, svc]))
            assert 2 in outcome.novel_channels  # registry saw new edges

    def test_main_only_never_collects(self, make_config):
        config = make_config(mode="main-only")
        with Campaign(config) as campaign:
            campaign.warmup()
            for _ in range(3):
                outcome = campaign.execute_testcase(MessageSequence([REGISTER]))
                assert not outcome.collected
            assert campaign.controller.request_log == []

    def test_hang_detection(self, make_config):
        config = make_config(msg_timeout_ms=0.0001)
        with Campaign(config) as campaign:
            outcome = campaign.execute_testcase(MessageSequence([REGISTER]))
            assert outcome.status == "hang"
            assert outcome.responses[-1] is None

    def test_crash_pipeline_and_witness_replay(self, make_config):
        config = make_config(defects="D1")
        with Campaign(config) as campaign:
            campaign.warmup()
            outcome = campaign.execute_testcase(d1_sequence())
            assert outcome.status == "crashed"
            event = outcome.crash_events[0]
            assert event.name == "entry"
            assert event.site_id == ALL_DEFECTS["D1"].crash_site_id
            campaign._record_crashes(outcome, d1_sequence())
            assert campaign.crash_table.unique_count == 1
            # replay the stored witness: deterministic same site
            record = campaign.crash_table.rows()[0]
            blob = open(os.path.join(config.resolved_crash_dir(),
                                     record.witness_file), "rb").read()
            witness = deserialize_corpus(blob)
            replay = campaign.execute_testcase(witness)
            assert replay.status == "crashed"
            assert replay.crash_events[0].site_id == record.site_id

    def test_crash_collect_reason(self, make_config):
        config = make_config(defects="D1", sweep_k=0)
        with Campaign(config) as campaign:
            campaign.warmup()
            outcome = campaign.execute_testcase(d1_sequence())
            assert outcome.status == "crashed"
            # a crash execution with no *new* main bits must still trigger
            # collection (second crash at the same site: edges known)
            campaign.execute_testcase(d1_sequence())
            outcome = campaign.execute_testcase(d1_sequence())
            assert outcome.collected
            assert outcome.collect_reason == "crash"


class TestRunCampaign:
    def test_short_multi_run_artifacts(self, make_config):
        config = make_config(max_execs=120)
        campaign = Campaign(config)
        campaign.start_target()
        try:
            summary = campaign.run()
        finally:
            campaign.shutdown()
        assert summary["execs"] >= 120
        assert summary["corpus_size"] >= 2
        assert summary["stop_reason"] == "max_execs"
        # artifacts on disk
        assert os.path.exists(os.path.join(config.work_dir, "summary.json"))
        stats_ok = check_monotonic(config.resolved_stats_file())
        assert stats_ok.ok, stats_ok.problems
        header, rows = read_stats_csv(config.resolved_stats_file())
        assert rows, "expected at least the final stats row"
        corpus_files = os.listdir(config.resolved_corpus_dir())
        assert len(corpus_files) == summary["corpus_size"]
        # admission soundness: every admitted seed had novelty somewhere
        assert all(entry["channels"] for entry in summary["admissions"])

    def test_budget_accounting(self, make_config):
        config = make_config(max_execs=100)
        campaign = Campaign(config)
        campaign.start_target()
        try:
            campaign.run()
        finally:
            campaign.shutdown()
        for visit in campaign.visits:
            assert (visit.executed + visit.aborted_by_budget == visit.energy
                    or visit.aborted_by_crash == visit.energy - visit.executed)

    def test_collection_gating_reasons(self, make_config):
        config = make_config(max_execs=150, sweep_k=10)
        campaign = Campaign(config)
        campaign.start_target()
        try:
            campaign.run()
        finally:
            campaign.shutdown()
        log = campaign.controller.request_log
        assert log, "multi campaign must collect at least once"
        allowed = {"warmup", "initial-corpus", "new-main-bits", "crash", "sweep"}
        assert {entry.reason for entry in log} <= allowed
        assert any(entry.reason == "sweep" for entry in log)

    def test_main_only_admissions_are_channel0(self, make_config):
        config = make_config(mode="main-only", max_execs=120)
        campaign = Campaign(config)
        campaign.start_target()
        try:
            summary = campaign.run()
        finally:
            campaign.shutdown()
        for entry in summary["admissions"]:
            assert entry["channels"] == [0]
        assert campaign.controller.request_log == []

    def test_defect_campaign_finds_and_records_d1(self, make_config):
        config = make_config(defects="D1", max_execs=3000, rng_seed=7)
        campaign = Campaign(config)
        campaign.start_target()
        try:
            summary = campaign.run()
        finally:
            campaign.shutdown()
        sites = {crash["site_id"] for crash in summary["crashes"]}
        assert ALL_DEFECTS["D1"].crash_site_id in sites
        records = json.load(open(os.path.join(config.resolved_crash_dir(),
                                              "records.json")))
        assert any(r["site_id"] == ALL_DEFECTS["D1"].crash_site_id
                   for r in records)


class TestReplay:
    def test_replay_reports_channels_and_crash(self, make_config):
        config = make_config(defects="D1")
        with Campaign(config) as campaign:
            report = campaign.replay_sequence(d1_sequence())
            assert report["status"] == "crashed"
            assert report["crash_sites"][0]["site_id"] == \
                ALL_DEFECTS["D1"].crash_site_id
            assert set(report["new_edges"]) == {0, 1, 2, 3}
            assert report["new_edges"][0] > 0

    def test_replay_shipped_seed(self, make_config):
        with Campaign(make_config()) as campaign:
            report = campaign.replay_sequence(shipped_seeds()[0])
            assert report["status"] == "ok"
            # reply TLV: type 0x90, len 1, payload status OK
            assert report["responses"][0].startswith("900100")
