"""Campaign configuration.

Flat key=value text files ('#' starts a comment). Every key has a default;
unknown keys are rejected. `main-only` mode is the single-channel baseline:
it zeroes the non-main channel weights and disables extra-channel collection
entirely (no sweep, no downstream resets).
"""

import os
from dataclasses import dataclass, fields, replace

from meshfuzz.errors import ConfigError
from meshfuzz.scoring import ScoreWeights
from meshfuzz.sutsim.defects import parse_defect_set
from meshfuzz.sutsim.preset import N_CHANNELS

MODE_MULTI = "multi"
MODE_MAIN_ONLY = "main-only"


@dataclass
class CampaignConfig:
    # campaign
    mode: str = MODE_MULTI
    budget_s: float = 600.0          # wall-clock budget; 0 = unlimited
    max_execs: int = 0               # execution budget; 0 = unlimited
    rng_seed: int = 1
    host: str = "127.0.0.1"

    # scoring
    w1: float = 0.7
    w2: float = 0.3
    beta: float = 0.1
    alpha_main: float = 0.4          # others share 1 - alpha_main equally
    alphas: str = ""                 # optional comma list overriding the split
    e_min: int = 16
    e_max: int = 256
    s_ref_percentile: float = 95.0
    s_ref_floor: float = 1e-6
    p_skip: float = 0.75
    scoring_time: str = "measured"   # measured | fixed (fixed = reproducible)
    time_floor_ms: float = 1.0

    # coverage collection
    size_m: int = 65536
    sweep_k: int = 100               # extra-channel sweep period; 0 disables
    settle_delay_ms: float = 20.0
    collect_timeout_ms: int = 250
    msg_timeout_ms: float = 200.0

    # target lifecycle
    poll_interval_ms: float = 50.0
    restart_timeout_s: float = 2.0
    restart_storm_limit: int = 10
    restart_storm_window_s: float = 60.0
    defects: str = ""

    # artifacts
    work_dir: str = "campaign-out"
    corpus_dir: str = ""             # default <work_dir>/corpus
    crash_dir: str = ""              # default <work_dir>/crashes
    stats_file: str = ""             # default <work_dir>/stats.csv
    stats_interval_s: float = 5.0

    def __post_init__(self):
        if self.mode not in (MODE_MULTI, MODE_MAIN_ONLY):
            raise ConfigError(f"mode must be {MODE_MULTI} or {MODE_MAIN_ONLY}")
        if self.scoring_time not in ("measured", "fixed"):
            raise ConfigError("scoring_time must be 'measured' or 'fixed'")
        if self.e_min < 1 or self.e_max < self.e_min:
            raise ConfigError("need 1 <= e_min <= e_max")
        if not 0 <= self.p_skip < 1:
            raise ConfigError("p_skip must be in [0, 1)")
        if self.budget_s < 0 or self.max_execs < 0:
            raise ConfigError("budgets must be nonnegative")
        if self.budget_s == 0 and self.max_execs == 0:
            raise ConfigError("set budget_s or max_execs (both 0 would never stop)")
        if self.sweep_k < 0:
            raise ConfigError("sweep_k must be >= 0")
        parse_defect_set_or_raise(self.defects)
        self.effective_alphas()  # validates

    # -- derived values ---------------------------------------------------------

    def effective_alphas(self) -> tuple[float, ...]:
        if self.alphas.strip():
            try:
                values = tuple(float(part) for part in self.alphas.split(","))
            except ValueError as exc:
                raise ConfigError(f"bad alphas list: {exc}") from exc
            if len(values) != N_CHANNELS:
                raise ConfigError(f"alphas must list {N_CHANNELS} values")
        else:
            rest = (1.0 - self.alpha_main) / (N_CHANNELS - 1)
            values = (self.alpha_main,) + (rest,) * (N_CHANNELS - 1)
        if self.mode == MODE_MAIN_ONLY:
            values = (values[0],) + (0.0,) * (N_CHANNELS - 1)
        return values

    def weights(self) -> ScoreWeights:
        return ScoreWeights(self.w1, self.w2, self.beta, self.effective_alphas())

    @property
    def effective_sweep_k(self) -> int:
        return 0 if self.mode == MODE_MAIN_ONLY else self.sweep_k

    @property
    def multi(self) -> bool:
        return self.mode == MODE_MULTI

    def resolved_corpus_dir(self) -> str:
        return self.corpus_dir or os.path.join(self.work_dir, "corpus")

    def resolved_crash_dir(self) -> str:
        return self.crash_dir or os.path.join(self.work_dir, "crashes")

    def resolved_stats_file(self) -> str:
        return self.stats_file or os.path.join(self.work_dir, "stats.csv")

    def with_overrides(self, **overrides) -> "CampaignConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def parse_defect_set_or_raise(text: str):
    try:
        return parse_defect_set(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _type_name(tp) -> str:
    return tp if isinstance(tp, str) else tp.__name__


_FIELD_TYPES = {f.name: _type_name(f.type) for f in fields(CampaignConfig)}


def _convert(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw.strip())
    return values


def load_config(path: str | None, **overrides) -> CampaignConfig:
    values = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                values = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    return CampaignConfig(**values)


def example_config_text() -> str:
    """A config file listing every key at its default."""
    defaults = CampaignConfig()
    lines = ["# meshfuzz campaign configuration (key = value, '#' comments)"]
    for f in fields(CampaignConfig):
        lines.append(f"{f.name} = {getattr(defaults, f.name)}")
    return "\n".join(lines) + "\n"
