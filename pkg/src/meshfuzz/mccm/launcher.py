"""Component process lifecycle: spawn, monitor, restart.

The launcher creates each component's shared coverage region, starts the
component (passing the region path, its listen port, and channel id through
the MCCM_* environment variables) plus its collector, and polls process
liveness. An abnormal exit (killed by a signal, exit code >= 128, or the
designated crash exit code 77) raises a crash event attributed to the test
case in flight, after which the component is restarted on a zeroed region.
Too many restarts of one component inside a short window flag a restart
storm, which aborts the campaign.
"""

import os
import queue
import re
import socket
import subprocess
import sys
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from meshfuzz.errors import RestartStormError, TargetError
from meshfuzz.mccm.region import create_region, Region

CRASH_EXIT_CODE = 77
DEFAULT_POLL_INTERVAL_S = 0.05
DEFAULT_RESTART_TIMEOUT_S = 2.0
DEFAULT_STORM_LIMIT = 10
DEFAULT_STORM_WINDOW_S = 60.0

# Synthetic crash-site ids for abnormal exits that left no crash-log line.
SITE_SIGNAL_BASE = 0xE000   # + signal number
SITE_EXITCODE_BASE = 0xE100  # + (exit code & 0xFF)

_CRASH_LINE = re.compile(r"^CRASH (\S+) (\d+) (\S*)$")


@dataclass
class ComponentLaunchSpec:
    name: str
    channel_id: int
    argv: list[str]
    region_path: str
    size_m: int
    listen_host: str = "127.0.0.1"
    listen_port: int = 0
    collector_port: int = 0
    crash_log: str | None = None
    env: dict = field(default_factory=dict)
    log_dir: str | None = None
    spawn_collector: bool = True


@dataclass
class ComponentStatus:
    name: str
    channel_id: int
    alive: bool
    pid: int | None
    restart_count: int
    last_exit: tuple[str, float] | None = None


@dataclass(frozen=True)
class CrashEvent:
    name: str
    channel_id: int
    site_id: int
    token: str
    exit_desc: str
    testcase_index: int | None
    timestamp: float


def describe_exit(returncode: int) -> str:
    if returncode < 0:
        return f"signal {-returncode}"
    return f"exit {returncode}"


def is_abnormal_exit(returncode: int) -> bool:
    return returncode < 0 or returncode >= 128 or returncode == CRASH_EXIT_CODE


class _Managed:
    """One component plus its collector and bookkeeping."""

    def __init__(self, spec: ComponentLaunchSpec):
        self.spec = spec
        self.proc: subprocess.Popen | None = None
        self.collector: subprocess.Popen | None = None
        self.restart_count = 0
        self.last_exit: tuple[str, float] | None = None
        self.crash_log_offset = 0
        self.restart_times: deque = deque()
        self.log_fh = None


class Launcher:
    def __init__(self, poll_interval_s: float = DEFAULT_POLL_INTERVAL_S,
                 restart_timeout_s: float = DEFAULT_RESTART_TIMEOUT_S,
                 storm_limit: int = DEFAULT_STORM_LIMIT,
                 storm_window_s: float = DEFAULT_STORM_WINDOW_S,
                 clock=time.monotonic):
        self.poll_interval_s = poll_interval_s
        self.restart_timeout_s = restart_timeout_s
        self.storm_limit = storm_limit
        self.storm_window_s = storm_window_s
        self.clock = clock
        self.events: "queue.Queue[CrashEvent]" = queue.Queue()
        self.storm_error: RestartStormError | None = None
        self._managed: dict[str, _Managed] = {}
        self._lock = threading.Lock()
        self._case_index: int | None = None
        self._last_case_index: int | None = None
        self._stop = threading.Event()
        self._monitor: threading.Thread | None = None

    # -- test-case window ------------------------------------------------------

    def begin_case(self, index: int) -> None:
        with self._lock:
            self._case_index = index

    def end_case(self) -> None:
        with self._lock:
            if self._case_index is not None:
                self._last_case_index = self._case_index
            self._case_index = None

    def _attributed_case(self) -> int | None:
        with self._lock:
            return self._case_index if self._case_index is not None else self._last_case_index

    # -- spawning ---------------------------------------------------------------

    def _component_env(self, spec: ComponentLaunchSpec) -> dict:
        env = dict(os.environ)
        env.update(spec.env)
        env["MCCM_REGION"] = spec.region_path
        env["MCCM_LISTEN"] = str(spec.listen_port)
        env["MCCM_CHANNEL"] = str(spec.channel_id)
        return env

    def _open_log(self, managed: _Managed):
        spec = managed.spec
        if spec.log_dir and managed.log_fh is None:
            os.makedirs(spec.log_dir, exist_ok=True)
            managed.log_fh = open(os.path.join(spec.log_dir, f"{spec.name}.log"), "ab")
        return managed.log_fh

    def _start_component(self, managed: _Managed) -> None:
        spec = managed.spec
        log_fh = self._open_log(managed)
        managed.proc = subprocess.Popen(
            spec.argv, env=self._component_env(spec),
            stdout=log_fh or subprocess.DEVNULL,
            stderr=log_fh or subprocess.DEVNULL)
        self._wait_port(spec.listen_host, spec.listen_port, managed.proc, spec.name)

    def _wait_port(self, host: str, port: int, proc: subprocess.Popen, name: str) -> None:
        deadline = time.monotonic() + self.restart_timeout_s
        while time.monotonic() < deadline:
            if proc.poll() is not None:
                raise TargetError(
                    f"component {name} exited during startup "
                    f"({describe_exit(proc.returncode)})")
            try:
                with socket.create_connection((host, port), timeout=0.1):
                    return
            except OSError:
                time.sleep(0.01)
        raise TargetError(f"component {name} did not open {host}:{port} "
                          f"within {self.restart_timeout_s}s")

    def spawn(self, spec: ComponentLaunchSpec) -> ComponentStatus:
        """Create the region, start the component and its collector, and wait
        until both are reachable."""
        if spec.listen_port == 0:
            raise TargetError(f"component {spec.name}: listen_port must be preassigned")
        create_region(spec.region_path, spec.channel_id, spec.size_m)
        managed = _Managed(spec)
        try:
            self._start_component(managed)
            if spec.spawn_collector:
                managed.collector = subprocess.Popen(
                    [sys.executable, "-m", "meshfuzz.mccm.collector",
                     "--region", spec.region_path,
                     "--listen", str(spec.collector_port),
                     "--host", spec.listen_host,
                     "--channel", str(spec.channel_id)],
                    stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
                self._wait_port(spec.listen_host, spec.collector_port,
                                managed.collector, f"{spec.name}-collector")
        except TargetError:
            self._terminate(managed)
            raise
        self._managed[spec.name] = managed
        return self.status(spec.name)

    # -- monitoring ----------------------------------------------------------------

    def start_monitor(self) -> None:
        if self._monitor is None:
            self._monitor = threading.Thread(target=self._monitor_loop, daemon=True)
            self._monitor.start()

    def _monitor_loop(self) -> None:
        while not self._stop.is_set():
            self.poll_once()
            self._stop.wait(self.poll_interval_s)

    def poll_once(self) -> None:
        """Single liveness pass; exposed for deterministic tests."""
        for managed in list(self._managed.values()):
            proc = managed.proc
            if proc is None or proc.poll() is None:
                continue
            self._handle_exit(managed, proc.returncode)

    def _handle_exit(self, managed: _Managed, returncode: int) -> None:
        now = self.clock()
        desc = describe_exit(returncode)
        managed.last_exit = (desc, now)
        managed.proc = None
        if is_abnormal_exit(returncode):
            site_id, token = self._read_crash_line(managed, returncode)
            self.events.put(CrashEvent(
                name=managed.spec.name, channel_id=managed.spec.channel_id,
                site_id=site_id, token=token, exit_desc=desc,
                testcase_index=self._attributed_case(), timestamp=now))
        if self._stop.is_set() or self.storm_error is not None:
            return
        self._note_restart(managed)
        if self.storm_error is not None:
            return
        self._restart(managed)

    def _read_crash_line(self, managed: _Managed, returncode: int) -> tuple[int, str]:
        path = managed.spec.crash_log
        if path and os.path.exists(path):
            with open(path, "r", encoding="utf-8", errors="replace") as fh:
                fh.seek(managed.crash_log_offset)
                new = fh.read()
                managed.crash_log_offset = fh.tell()
            lines = [ln for ln in new.splitlines() if ln.strip()]
            for line in reversed(lines):
                match = _CRASH_LINE.match(line.strip())
                if match:
                    return int(match.group(2)), match.group(3)
        if returncode < 0:
            return SITE_SIGNAL_BASE + (-returncode), ""
        return SITE_EXITCODE_BASE + (returncode & 0xFF), ""

    def _note_restart(self, managed: _Managed) -> None:
        now = self.clock()
        times = managed.restart_times
        times.append(now)
        while times and now - times[0] > self.storm_window_s:
            times.popleft()
        if len(times) > self.storm_limit:
            self.storm_error = RestartStormError(
                f"component {managed.spec.name}: {len(times)} restarts within "
                f"{self.storm_window_s:.0f}s (limit {self.storm_limit}); last exit "
                f"{managed.last_exit[0] if managed.last_exit else 'unknown'}")

    def _restart(self, managed: _Managed) -> None:
        spec = managed.spec
        managed.restart_count += 1
        try:
            # Cells are deliberately left intact: the campaign zeroes them at
            # the next test-case boundary, and zeroing here would race its
            # post-crash snapshot of the dead process's coverage.
            with Region(spec.region_path) as region:
                region.set_restart_count(managed.restart_count)
            self._start_component(managed)
        except (TargetError, OSError) as exc:
            self.storm_error = RestartStormError(
                f"component {spec.name} failed to restart: {exc}")

    # -- status / shutdown ------------------------------------------------------------

    def status(self, name: str) -> ComponentStatus:
        managed = self._managed[name]
        proc = managed.proc
        alive = proc is not None and proc.poll() is None
        return ComponentStatus(
            name=name, channel_id=managed.spec.channel_id, alive=alive,
            pid=proc.pid if alive else None,
            restart_count=managed.restart_count, last_exit=managed.last_exit)

    def statuses(self) -> dict[str, ComponentStatus]:
        return {name: self.status(name) for name in self._managed}

    def all_alive(self) -> bool:
        return all(st.alive for st in self.statuses().values())

    def wait_all_alive(self, timeout_s: float) -> bool:
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            if self.storm_error is not None:
                return False
            if self.all_alive():
                return True
            time.sleep(0.01)
        return self.all_alive()

    @staticmethod
    def _terminate(managed: _Managed) -> None:
        for proc in (managed.proc, managed.collector):
            if proc is None or proc.poll() is not None:
                continue
            proc.terminate()
            try:
                proc.wait(timeout=1.0)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()

    def stop_all(self) -> None:
        self._stop.set()
        if self._monitor is not None:
            self._monitor.join(timeout=2.0)
            self._monitor = None
        for managed in self._managed.values():
            self._terminate(managed)
            if managed.log_fh is not None:
                managed.log_fh.close()
                managed.log_fh = None
        self._managed.clear()
