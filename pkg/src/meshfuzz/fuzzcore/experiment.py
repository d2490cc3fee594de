"""Paired-trial experiment harness.

Compares multi-channel and main-only campaigns on the bundled target:
each pair shares one rng seed and runs both modes as separate subprocesses
(concurrently by default, so both experience the same machine load), then
defect discovery times are read back from the campaign artifacts. Also
provides the sequential throughput comparison used for the overhead bound.
"""

import json
import math
import os
import statistics
import subprocess
import sys
import threading
from dataclasses import dataclass, field

from meshfuzz.sutsim.defects import ALL_DEFECTS

DEFECT_BY_SITE = {spec.crash_site_id: spec.defect_id for spec in ALL_DEFECTS.values()}


@dataclass
class TrialResult:
    mode: str
    rng_seed: int
    workdir: str
    elapsed_s: float
    execs: int
    execs_per_s: float
    stop_reason: str | None
    discoveries: dict = field(default_factory=dict)  # defect_id -> first_seen_s
    returncode: int = 0

    def time_to(self, defect_id: str) -> float:
        """Discovery time, +inf when the defect was never found."""
        return self.discoveries.get(defect_id, math.inf)


def write_config(path: str, values: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in values.items():
            fh.write(f"{key} = {value}\n")


def run_trial(workdir: str, mode: str, rng_seed: int, budget_s: float,
              overrides: dict | None = None) -> TrialResult:
    """Run one campaign in a subprocess and read back its artifacts."""
    os.makedirs(workdir, exist_ok=True)
    values = {
        "mode": mode,
        "rng_seed": rng_seed,
        "budget_s": budget_s,
        "work_dir": workdir,
    }
    if overrides:
        values.update(overrides)
    config_path = os.path.join(workdir, "campaign.cfg")
    write_config(config_path, values)
    proc = subprocess.run(
        [sys.executable, "-m", "meshfuzz.fuzzcore.cli", "fuzz",
         "--config", config_path],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT)
    summary_path = os.path.join(workdir, "summary.json")
    if not os.path.exists(summary_path):
        raise RuntimeError(
            f"trial in {workdir} left no summary (rc={proc.returncode}):\n"
            f"{proc.stdout.decode(errors='replace')[-2000:]}")
    with open(summary_path, "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    discoveries = {}
    for crash in summary.get("crashes", []):
        defect_id = DEFECT_BY_SITE.get(crash["site_id"])
        if defect_id is not None and defect_id not in discoveries:
            discoveries[defect_id] = crash["first_seen"]
    return TrialResult(
        mode=mode, rng_seed=rng_seed, workdir=workdir,
        elapsed_s=summary.get("elapsed_s", 0.0),
        execs=summary.get("execs", 0),
        execs_per_s=summary.get("execs_per_s", 0.0),
        stop_reason=summary.get("stop_reason"),
        discoveries=discoveries, returncode=proc.returncode)


def run_pair(base_dir: str, pair_index: int, rng_seed: int, budget_s: float,
             overrides: dict | None = None,
             concurrent: bool = True) -> tuple[TrialResult, TrialResult]:
    """One paired trial: identical rng seed, multi vs main-only."""
    results: dict[str, TrialResult] = {}
    errors: list[BaseException] = []

    def run(mode: str) -> None:
        try:
            workdir = os.path.join(base_dir, f"pair{pair_index:02d}-{mode}")
            results[mode] = run_trial(workdir, mode, rng_seed, budget_s, overrides)
        except BaseException as exc:  # noqa: BLE001 - surfaced after join
            errors.append(exc)

    if concurrent:
        threads = [threading.Thread(target=run, args=(mode,))
                   for mode in ("multi", "main-only")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    else:
        run("multi")
        run("main-only")
    if errors:
        raise errors[0]
    return results["multi"], results["main-only"]


def censored_median(times: list[float]) -> float:
    return statistics.median(times)


@dataclass
class MethodAdvantageReport:
    pairs: list
    d1_multi: int
    d1_main: int
    d2_median_multi: float
    d2_median_main: float
    d3_trials_multi: int
    d3_trials_main: int
    n_pairs: int

    def verdicts(self) -> dict:
        return {
            "a_both_find_d1_every_trial":
                self.d1_multi == self.n_pairs and self.d1_main == self.n_pairs,
            "b_d2_median_lower_in_multi":
                self.d2_median_multi < self.d2_median_main,
            "c_d3_multi_at_least_7_and_strictly_more":
                self.d3_trials_multi >= 7 and self.d3_trials_multi > self.d3_trials_main,
        }


def run_method_advantage(base_dir: str, n_pairs: int, budget_s: float,
                         overrides: dict | None = None, seed0: int = 1000,
                         concurrent: bool = True,
                         log=print) -> MethodAdvantageReport:
    pairs = []
    for pair_index in range(n_pairs):
        rng_seed = seed0 + pair_index
        multi, main = run_pair(base_dir, pair_index, rng_seed, budget_s,
                               overrides, concurrent=concurrent)
        pairs.append((multi, main))
        if log:
            log(f"pair {pair_index}: seed {rng_seed} "
                f"multi={_fmt_discoveries(multi)} main={_fmt_discoveries(main)}")
    report = MethodAdvantageReport(
        pairs=pairs,
        d1_multi=sum(1 for m, _ in pairs if "D1" in m.discoveries),
        d1_main=sum(1 for _, b in pairs if "D1" in b.discoveries),
        d2_median_multi=censored_median([m.time_to("D2") for m, _ in pairs]),
        d2_median_main=censored_median([b.time_to("D2") for _, b in pairs]),
        d3_trials_multi=sum(1 for m, _ in pairs if "D3" in m.discoveries),
        d3_trials_main=sum(1 for _, b in pairs if "D3" in b.discoveries),
        n_pairs=n_pairs)
    return report


def _fmt_discoveries(result: TrialResult) -> str:
    parts = [f"{d}@{t:.0f}s" for d, t in sorted(result.discoveries.items())]
    return "{" + ",".join(parts) + f"}}({result.execs}x)"


def run_overhead_check(base_dir: str, budget_s: float = 300.0,
                       rng_seed: int = 424242,
                       overrides: dict | None = None) -> tuple[float, TrialResult, TrialResult]:
    """Sequential multi vs main-only throughput comparison with defects off.

    Sequential on purpose: this measures executions per second, so the two
    runs must not contend with each other.
    """
    values = {"defects": ""}
    if overrides:
        values.update(overrides)
    multi = run_trial(os.path.join(base_dir, "overhead-multi"), "multi",
                      rng_seed, budget_s, values)
    main = run_trial(os.path.join(base_dir, "overhead-main"), "main-only",
                     rng_seed, budget_s, values)
    ratio = multi.execs_per_s / main.execs_per_s if main.execs_per_s else 0.0
    return ratio, multi, main
