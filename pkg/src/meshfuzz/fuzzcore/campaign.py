"""The fuzzing campaign loop.

One campaign owns all fuzzer state: it boots the simulated deployment
through the launcher, drives test cases over the entry component's message
link, reads the main coverage channel straight from the entry's shared
region, and asks the controller for the remaining channels only when the
main channel showed new bits, a crash arrived, or the periodic sweep fired.
Mutants that produced new bits on any collected channel join the seed queue;
crashes are deduplicated by (channel, site).
"""

import hashlib
import json
import os
import time
from dataclasses import dataclass, field

from meshfuzz import kernels
from meshfuzz.coverage import (ChannelGain, CoverageMap, VirginState, classify_counts,
                               count_covered_edges, has_new_bits, zero_gain)
from meshfuzz.errors import RestartStormError, TargetError
from meshfuzz.mccm.controller import Controller, MissingChannel
from meshfuzz.mccm.launcher import CrashEvent, Launcher
from meshfuzz.mccm.region import Region
from meshfuzz.mutation import (MessageSequence, MutationBudget, mutate,
                               serialize_corpus)
from meshfuzz.scoring import (EnergyPolicy, ExecutionRecord, ScoreBreakdown,
                              ScoreReference, SeedScheduler, ScoreWeights,
                              assign_energy, score)
from meshfuzz.sutsim import preset, tlv
from meshfuzz.sutsim.client import TargetClient
from meshfuzz.fuzzcore.config import CampaignConfig
from meshfuzz.fuzzcore.stats import StatsWriter
from meshfuzz.fuzzcore.triage import CrashTable

from random import Random


@dataclass
class Seed:
    id: int
    sequence: MessageSequence
    exec_record: ExecutionRecord
    score: ScoreBreakdown
    energy: int
    favored: bool
    discovered_at: float
    parent_id: int | None = None
    novel_channels: tuple[int, ...] = ()


@dataclass
class ExecutionOutcome:
    status: str                       # ok | hang | crashed | invalid
    record: ExecutionRecord | None
    responses: list
    novel_channels: tuple[int, ...] = ()
    crash_events: list = field(default_factory=list)
    collected: bool = False
    collect_reason: str = ""
    missing_channels: tuple[int, ...] = ()


@dataclass
class VisitLog:
    seed_id: int
    energy: int
    executed: int
    aborted_by_crash: int
    aborted_by_budget: int


class Campaign:
    def __init__(self, config: CampaignConfig):
        self.config = config
        self.rng = Random(config.rng_seed)
        self.weights: ScoreWeights = config.weights()
        self.n_channels = preset.N_CHANNELS
        self.scheduler = SeedScheduler(self.rng, config.p_skip)
        self.score_ref = ScoreReference(config.s_ref_percentile, config.s_ref_floor)
        self.time_floor_s = config.time_floor_ms / 1000.0

        self.queue: list[Seed] = []
        self.visits: list[VisitLog] = []
        self.admissions: list[dict] = []
        self.virgins = [VirginState(i, config.size_m) for i in range(self.n_channels)]

        self.execs = 0            # scored executions (includes crashes/hangs)
        self.cases = 0            # every driven test case, warmup included
        self.invalid = 0
        self._execs_since_sweep = 0
        self._t0: float | None = None
        self._abort_reason: str | None = None
        self._need_health_check = False
        self._recent_sequences: dict[int, MessageSequence] = {}

        self.launcher: Launcher | None = None
        self.controller: Controller | None = None
        self.client: TargetClient | None = None
        self.main_region: Region | None = None
        self.deployment = None
        self.crash_table: CrashTable | None = None
        self.stats: StatsWriter | None = None

    # -- lifecycle ---------------------------------------------------------------

    def elapsed(self) -> float:
        return 0.0 if self._t0 is None else time.monotonic() - self._t0

    def start_target(self) -> None:
        cfg = self.config
        os.makedirs(cfg.work_dir, exist_ok=True)
        self.deployment = preset.build_deployment(
            cfg.work_dir, cfg.size_m, defects=cfg.defects, host=cfg.host,
            collect_timeout_ms=cfg.collect_timeout_ms)
        self.launcher = Launcher(
            poll_interval_s=cfg.poll_interval_ms / 1000.0,
            restart_timeout_s=cfg.restart_timeout_s,
            storm_limit=cfg.restart_storm_limit,
            storm_window_s=cfg.restart_storm_window_s,
            clock=self.elapsed)
        try:
            for spec in self.deployment.specs:
                self.launcher.spawn(spec)
        except TargetError:
            self.launcher.stop_all()
            raise
        self.launcher.start_monitor()
        self.controller = Controller()
        self.client = TargetClient(cfg.host, self.deployment.entry_port,
                                   timeout_s=cfg.msg_timeout_ms / 1000.0)
        self.client.connect(attempts=20)
        self.main_region = Region(self.deployment.entry_region)
        self.crash_table = CrashTable(cfg.resolved_crash_dir())
        self.stats = StatsWriter(cfg.resolved_stats_file(), self.n_channels,
                                 cfg.stats_interval_s)
        os.makedirs(cfg.resolved_corpus_dir(), exist_ok=True)
        self._t0 = time.monotonic()

    def shutdown(self) -> None:
        if self.client is not None:
            self.client.close()
        if self.controller is not None:
            self.controller.close()
        if self.launcher is not None:
            self.launcher.stop_all()
        if self.main_region is not None:
            self.main_region.close()
            self.main_region = None

    def __enter__(self) -> "Campaign":
        self.start_target()
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()

    # -- execution ---------------------------------------------------------------

    @property
    def downstream_endpoints(self):
        return self.deployment.downstream_endpoints

    def warmup(self) -> None:
        """Absorb the baseline edges of an empty session so that a
        reset-only test case is no longer novel."""
        reset_only = MessageSequence([tlv.pack_tlv(tlv.MSG_SESSION_RESET, b"warmup")],
                                     origin="warmup")
        self.execute_testcase(reset_only, force_collect=self.config.multi,
                              reason="warmup")

    def execute_testcase(self, seq: MessageSequence, force_collect: bool = False,
                         reason: str = "") -> ExecutionOutcome:
        case_index = self.cases
        self.cases += 1
        self._recent_sequences[case_index] = seq
        for stale in [k for k in self._recent_sequences if k < case_index - 2]:
            del self._recent_sequences[stale]
        self.launcher.begin_case(case_index)
        try:
            outcome = self._execute_inner(seq, case_index, force_collect, reason)
        finally:
            self.launcher.end_case()
        if outcome.status in ("crashed", "invalid"):
            self._need_health_check = True
        return outcome

    def _ensure_healthy(self) -> bool:
        if self._need_health_check:
            if not self.launcher.wait_all_alive(self.config.restart_timeout_s + 1.0):
                return False
            self._need_health_check = False
        if not self.client.connected:
            try:
                self.client.connect(attempts=10)
            except ConnectionError:
                return False
        return True

    def _execute_inner(self, seq: MessageSequence, case_index: int,
                       force_collect: bool, reason: str) -> ExecutionOutcome:
        cfg = self.config
        if not self._ensure_healthy():
            return ExecutionOutcome("invalid", None, [])

        # fresh counters on every channel we might read this case
        self.main_region.zero_cells()
        if cfg.multi or force_collect:
            self.controller.reset(self.downstream_endpoints)

        # session reset is control plane: give it a sane floor even when the
        # per-message timeout is tuned very low
        token = f"c{case_index}".encode("ascii")
        control_timeout = max(cfg.msg_timeout_ms / 1000.0, 0.2)
        try:
            self.client.request(tlv.pack_tlv(tlv.MSG_SESSION_RESET, token),
                                timeout_s=control_timeout)
        except (TimeoutError, ConnectionError):
            events = self._await_crash_events()
            if events:
                return self._finish_case(seq, [], events, 0.0, False,
                                         force_collect, reason)
            return ExecutionOutcome("invalid", None, [])

        responses: list = []
        hang = False
        crash_events: list[CrashEvent] = []
        t_start = time.perf_counter()
        for message in seq.messages:
            try:
                responses.append(self.client.request(message))
            except TimeoutError:
                responses.append(None)
                hang = True
                break
            except ConnectionError:
                events = self._await_crash_events()
                if not events:
                    return ExecutionOutcome("invalid", None, responses)
                crash_events.extend(events)
                break
        exec_time = time.perf_counter() - t_start
        crash_events.extend(self._drain_crash_events())
        return self._finish_case(seq, responses, crash_events, exec_time, hang,
                                 force_collect, reason)

    def _finish_case(self, seq: MessageSequence, responses: list,
                     crash_events: list, exec_time: float, hang: bool,
                     force_collect: bool, reason: str) -> ExecutionOutcome:
        cfg = self.config
        crashed = bool(crash_events)

        raw = self.main_region.snapshot()
        main_map = CoverageMap.from_bytes(0, raw)
        classify_counts(main_map)
        novel_main, gain_main = has_new_bits(main_map, self.virgins[0])

        gains: list[ChannelGain] = [gain_main] + [
            zero_gain(i) for i in range(1, self.n_channels)]
        novel_channels = [0] if novel_main else []

        self._execs_since_sweep += 1
        sweep_due = (cfg.effective_sweep_k > 0
                     and self._execs_since_sweep >= cfg.effective_sweep_k)
        gate = cfg.multi and (novel_main or crashed or sweep_due)
        collected = False
        missing: tuple[int, ...] = ()
        collect_reason = ""
        if gate or force_collect:
            if sweep_due:
                self._execs_since_sweep = 0
            collect_reason = reason or (
                "new-main-bits" if novel_main else
                "crash" if crashed else "sweep")
            if cfg.settle_delay_ms > 0:
                time.sleep(cfg.settle_delay_ms / 1000.0)
            results = self.controller.collect(self.downstream_endpoints,
                                              reason=collect_reason)
            collected = True
            missing_list = []
            for channel_id in range(1, self.n_channels):
                result = results.get(channel_id)
                if result is None or isinstance(result, MissingChannel):
                    missing_list.append(channel_id)
                    continue
                novel_i, gain_i = has_new_bits(result, self.virgins[channel_id])
                gains[channel_id] = gain_i
                if novel_i:
                    novel_channels.append(channel_id)
            missing = tuple(missing_list)

        if cfg.scoring_time == "fixed":
            recorded_time = self.time_floor_s
        else:
            recorded_time = max(exec_time, self.time_floor_s)
        record = ExecutionRecord(tuple(gains), recorded_time)
        status = "crashed" if crashed else ("hang" if hang else "ok")
        return ExecutionOutcome(status, record, responses, tuple(novel_channels),
                                crash_events, collected, collect_reason, missing)

    # -- crash-event plumbing -----------------------------------------------------

    def _await_crash_events(self, extra_wait_s: float | None = None) -> list:
        """After a transport failure, give the monitor a few polls to confirm
        whether the peer actually crashed."""
        wait_s = extra_wait_s
        if wait_s is None:
            wait_s = max(6 * self.config.poll_interval_ms / 1000.0, 0.3)
        deadline = time.monotonic() + wait_s
        events = []
        while time.monotonic() < deadline:
            events.extend(self._drain_crash_events())
            if events:
                time.sleep(0.01)
                events.extend(self._drain_crash_events())
                return events
            time.sleep(0.01)
        return events

    def _drain_crash_events(self) -> list:
        events = []
        while True:
            try:
                events.append(self.launcher.events.get_nowait())
            except Exception:
                break
        return events

    def _record_crashes(self, outcome: ExecutionOutcome, current: MessageSequence) -> None:
        for event in outcome.crash_events:
            witness = self._recent_sequences.get(event.testcase_index, current)
            self.crash_table.add(event, witness, self.elapsed())

    # -- seed admission -------------------------------------------------------------

    def _admit(self, sequence: MessageSequence, outcome: ExecutionOutcome,
               breakdown: ScoreBreakdown, parent_id: int | None) -> Seed:
        seed = Seed(
            id=len(self.admissions), sequence=sequence,
            exec_record=outcome.record, score=breakdown, energy=0,
            favored=True, discovered_at=self.elapsed(), parent_id=parent_id,
            novel_channels=outcome.novel_channels)
        self.queue.append(seed)
        blob = serialize_corpus(sequence)
        digest = hashlib.sha256(blob).hexdigest()
        path = os.path.join(self.config.resolved_corpus_dir(),
                            f"seed_{seed.id:06d}.mcsq")
        with open(path, "wb") as fh:
            fh.write(blob)
        self.admissions.append({
            "id": seed.id, "parent": parent_id, "sha256": digest,
            "channels": list(outcome.novel_channels),
            "discovered_at": round(seed.discovered_at, 3)})
        return seed

    # -- stats ------------------------------------------------------------------------

    def _stats_tick(self, force: bool = False) -> None:
        elapsed = self.elapsed()
        if force or self.stats.due(elapsed):
            edges = [count_covered_edges(v) for v in self.virgins]
            self.stats.emit(elapsed, self.execs, edges, len(self.queue),
                            self.crash_table.unique_count,
                            self.crash_table.total_events)

    # -- main loop ---------------------------------------------------------------------

    def _stopped(self) -> str | None:
        if self.launcher.storm_error is not None:
            raise self.launcher.storm_error
        cfg = self.config
        if cfg.budget_s > 0 and self.elapsed() >= cfg.budget_s:
            return "budget_s"
        if cfg.max_execs > 0 and self.execs >= cfg.max_execs:
            return "max_execs"
        return None

    def _score_outcome(self, outcome: ExecutionOutcome) -> ScoreBreakdown:
        breakdown = score(outcome.record, self.weights, self.time_floor_s)
        self.score_ref.observe(breakdown.s)
        return breakdown

    def _load_initial_corpus(self) -> None:
        for sequence in preset.shipped_seeds():
            outcome = self.execute_testcase(sequence, reason="initial-corpus")
            if outcome.status == "invalid" or outcome.record is None:
                raise TargetError("initial corpus execution failed")
            self.execs += 1
            breakdown = self._score_outcome(outcome)
            self._record_crashes(outcome, sequence)
            if outcome.novel_channels and outcome.status != "crashed":
                self._admit(sequence, outcome, breakdown, parent_id=None)
        if not self.queue:
            raise TargetError("initial corpus produced no coverage; nothing to fuzz")

    def run(self) -> dict:
        stop_reason = None
        try:
            self.warmup()
            self._load_initial_corpus()
            last_cycles = -1
            s_ref = self.score_ref.recompute()
            while True:
                stop_reason = self._stopped()
                if stop_reason:
                    break
                seed = self.scheduler.select(self.queue)
                if self.scheduler.cycles != last_cycles:
                    last_cycles = self.scheduler.cycles
                    s_ref = self.score_ref.recompute()
                policy = EnergyPolicy(self.config.e_min, self.config.e_max, s_ref)
                energy = assign_energy(seed.score.s, policy)
                seed.energy = energy
                visit_rng = self.rng.getrandbits(64)
                donors = [s.sequence for s in self.queue]
                executed = 0
                aborted_crash = 0
                aborted_budget = 0
                admitted_any = False
                for mutant in mutate(seed.sequence, MutationBudget(energy, visit_rng),
                                     donors):
                    stop_reason = self._stopped()
                    if stop_reason:
                        aborted_budget = energy - executed
                        break
                    outcome = self.execute_testcase(mutant)
                    executed += 1
                    if outcome.status == "invalid":
                        self.invalid += 1
                        continue
                    self.execs += 1
                    breakdown = self._score_outcome(outcome)
                    self._record_crashes(outcome, mutant)
                    if outcome.status == "crashed":
                        aborted_crash = energy - executed
                        break
                    if outcome.novel_channels:
                        self._admit(mutant, outcome, breakdown, parent_id=seed.id)
                        admitted_any = True
                    self._stats_tick()
                seed.favored = admitted_any
                self.visits.append(VisitLog(seed.id, energy, executed,
                                            aborted_crash, aborted_budget))
                self._stats_tick()
                if stop_reason:
                    break
        except RestartStormError as exc:
            self._abort_reason = str(exc)
            raise
        finally:
            self._finalize(stop_reason)
        return self.summary(stop_reason)

    def _finalize(self, stop_reason: str | None) -> None:
        try:
            self._stats_tick(force=True)
        except Exception:
            pass
        if self.crash_table is not None:
            self.crash_table.close()
        if self.stats is not None:
            self.stats.close()
        summary = self.summary(stop_reason)
        path = os.path.join(self.config.work_dir, "summary.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)

    def summary(self, stop_reason: str | None = None) -> dict:
        elapsed = self.elapsed()
        return {
            "mode": self.config.mode,
            "rng_seed": self.config.rng_seed,
            "budget_s": self.config.budget_s,
            "max_execs": self.config.max_execs,
            "elapsed_s": round(elapsed, 3),
            "execs": self.execs,
            "cases": self.cases,
            "invalid": self.invalid,
            "execs_per_s": round(self.execs / elapsed, 2) if elapsed > 0 else 0.0,
            "corpus_size": len(self.queue),
            "unique_crashes": self.crash_table.unique_count if self.crash_table else 0,
            "total_crash_events": self.crash_table.total_events if self.crash_table else 0,
            "per_channel_edges": [count_covered_edges(v) for v in self.virgins],
            "admissions": self.admissions,
            "crashes": [
                {"channel_id": r.channel_id, "component": r.component,
                 "site_id": r.site_id, "first_seen": round(r.first_seen, 3),
                 "count": r.count}
                for r in (self.crash_table.rows() if self.crash_table else [])],
            "aborted_visit_execs": sum(v.aborted_by_crash for v in self.visits),
            "kernel_backend": kernels.BACKEND,
            "stop_reason": stop_reason or self._abort_reason,
        }

    # -- replay -----------------------------------------------------------------------

    def replay_sequence(self, sequence: MessageSequence) -> dict:
        """Execute one sequence against fresh virgin state and report
        per-channel covered-edge deltas, responses, and crash outcome."""
        outcome = self.execute_testcase(sequence, force_collect=True, reason="replay")
        report = {
            "status": outcome.status,
            "new_edges": {g.channel_id: g.new_edges
                          for g in (outcome.record.gains if outcome.record else ())},
            "responses": [r.hex() if r is not None else None
                          for r in outcome.responses],
            "crash_sites": [{"component": e.name, "channel_id": e.channel_id,
                             "site_id": e.site_id, "token": e.token}
                            for e in outcome.crash_events],
            "missing_channels": list(outcome.missing_channels),
        }
        if outcome.crash_events:
            self._record_crashes(outcome, sequence)
        return report
