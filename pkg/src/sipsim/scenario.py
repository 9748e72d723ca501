"""Scenario configuration: schema, flat-file parsing, validation, wiring.

A scenario file is flat ``key = value`` text ('#' starts a comment).  Keys
match :class:`ScenarioConfig` field names exactly; unknown keys are errors.
``tau`` and ``mu`` are accepted and stored but unused (reserved knobs kept
so externally written scenario files parse).
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from sipsim import control
from sipsim.kernel import impl as _impl
from sipsim.metrics import EventLog


class ConfigError(Exception):
    """Invalid scenario: ``problems`` lists every violation found."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ScenarioConfig:
    """Everything one run needs; defaults model the reference testbed at desk scale."""

    seed: int = 1
    duration_s: float = 90.0
    offered_rate_cps: float | None = None
    sweep_cps: list[float] | None = None
    downstream_capacity_cps: float = 700.0
    upstream_capacity_cps: float = 2800.0  # provisioned 4x so P1 never overloads
    q_max: int = 4000
    t1_ms: float = 500.0
    control_enabled: bool = True
    z_th_ms: float = 200.0
    alpha: float = 3.0
    delay_history_size: int = 30
    initial_window: float = 1.0
    initial_win_th: float = 64.0
    overload_comparator: str = control.DEFAULT_COMPARATOR
    cpu_threshold: float = 0.90
    cpu_window_ms: float = 1000.0
    hold_time_dist: str = "exponential"
    hold_time_mean_s: float = 10.0
    answer_delay_ms: float = 0.0
    arrival_dist: str = "poisson"
    warmup_s: float = 20.0
    window_s: float = 60.0
    dns_delay_ms: float = 0.0
    link_delay_uac_p1_ms: float = 0.0
    link_delay_p1_p2_ms: float = 0.0
    link_delay_p2_uas_ms: float = 0.0
    link_loss_uac_p1: float = 0.0
    link_loss_p1_p2: float = 0.0
    link_loss_p2_uas: float = 0.0
    tau: float | None = None  # reserved, unused
    mu: float | None = None   # reserved, unused
    trace: bool = False       # programmatic only, not a file key

    def comparator_code(self) -> int:
        return control.COMPARATORS[self.overload_comparator]

    def with_overrides(self, **kwargs) -> "ScenarioConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs)


_FILE_KEYS = {f.name for f in fields(ScenarioConfig)} - {"trace"}

_BOOL_WORDS = {
    "true": True, "yes": True, "on": True, "1": True,
    "false": False, "no": False, "off": False, "0": False,
}


def _parse_value(key: str, raw: str, problems: list[str]):
    raw = raw.strip()
    if key == "control_enabled":
        b = _BOOL_WORDS.get(raw.lower())
        if b is None:
            problems.append(f"{key}: expected a boolean, got {raw!r}")
        return b
    if key in ("overload_comparator", "hold_time_dist", "arrival_dist"):
        return raw
    if key == "sweep_cps":
        out = []
        for part in raw.split(","):
            part = part.strip()
            if not part:
                continue
            try:
                out.append(float(part))
            except ValueError:
                problems.append(f"{key}: {part!r} is not a number")
        return out
    if key in ("seed", "q_max", "delay_history_size"):
        try:
            return int(raw)
        except ValueError:
            problems.append(f"{key}: expected an integer, got {raw!r}")
            return None
    try:
        return float(raw)
    except ValueError:
        problems.append(f"{key}: expected a number, got {raw!r}")
        return None


def parse_file(path: str | Path) -> ScenarioConfig:
    """Parse a scenario file; raises :class:`ConfigError` on any problem."""
    problems: list[str] = []
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            problems.append(f"line {lineno}: expected 'key = value', got {stripped!r}")
            continue
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _FILE_KEYS:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        val = _parse_value(key, raw, problems)
        if val is not None:
            values[key] = val
    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(**values)


def validate(cfg: ScenarioConfig) -> list[str]:
    """Return every violated constraint (empty list when the config is valid)."""
    p: list[str] = []
    if cfg.seed < 0:
        p.append("seed: must be >= 0")
    if cfg.offered_rate_cps is None and not cfg.sweep_cps:
        p.append("offered_rate_cps: required (or provide sweep_cps)")
    if cfg.offered_rate_cps is not None and cfg.offered_rate_cps <= 0:
        p.append("offered_rate_cps: must be > 0")
    if cfg.sweep_cps is not None:
        if not cfg.sweep_cps:
            p.append("sweep_cps: must be nonempty")
        elif any(r <= 0 for r in cfg.sweep_cps):
            p.append("sweep_cps: every rate must be > 0")
    if cfg.downstream_capacity_cps <= 0:
        p.append("downstream_capacity_cps: must be > 0")
    if cfg.upstream_capacity_cps <= 0:
        p.append("upstream_capacity_cps: must be > 0")
    if cfg.q_max < 0:
        p.append("q_max: must be >= 0")
    if cfg.t1_ms <= 0:
        p.append("t1_ms: must be > 0")
    if cfg.z_th_ms <= 0:
        p.append("z_th_ms: must be > 0")
    if cfg.alpha < 0:
        p.append("alpha: must be >= 0")
    if cfg.delay_history_size < 1:
        p.append("delay_history_size: must be >= 1")
    if cfg.initial_window < 1:
        p.append("initial_window: must be >= 1")
    if cfg.initial_win_th < 1:
        p.append("initial_win_th: must be >= 1")
    if cfg.overload_comparator not in control.COMPARATORS:
        p.append(
            "overload_comparator: must be one of %s"
            % ", ".join(sorted(control.COMPARATORS))
        )
    if not 0.0 < cfg.cpu_threshold <= 1.0:
        p.append("cpu_threshold: must be in (0, 1]")
    if cfg.cpu_window_ms <= 0:
        p.append("cpu_window_ms: must be > 0")
    if cfg.hold_time_dist not in ("exponential", "constant"):
        p.append("hold_time_dist: must be 'exponential' or 'constant'")
    if cfg.hold_time_mean_s < 0:
        p.append("hold_time_mean_s: must be >= 0")
    if cfg.answer_delay_ms < 0:
        p.append("answer_delay_ms: must be >= 0")
    if cfg.arrival_dist not in ("poisson", "deterministic"):
        p.append("arrival_dist: must be 'poisson' or 'deterministic'")
    if cfg.warmup_s < 0:
        p.append("warmup_s: must be >= 0")
    if cfg.window_s <= 0:
        p.append("window_s: must be > 0")
    if cfg.duration_s <= cfg.warmup_s + cfg.window_s:
        p.append("duration_s: must exceed warmup_s + window_s")
    if cfg.dns_delay_ms < 0:
        p.append("dns_delay_ms: must be >= 0")
    for name in ("link_delay_uac_p1_ms", "link_delay_p1_p2_ms", "link_delay_p2_uas_ms"):
        if getattr(cfg, name) < 0:
            p.append(f"{name}: must be >= 0")
    for name in ("link_loss_uac_p1", "link_loss_p1_p2", "link_loss_p2_uas"):
        if not 0.0 <= getattr(cfg, name) <= 1.0:
            p.append(f"{name}: must be in [0, 1]")
    return p


def build_scenario(cfg: ScenarioConfig, *, log: EventLog | None = None):
    """Validate and wire one runnable simulation (single offered rate)."""
    problems = validate(cfg)
    if cfg.offered_rate_cps is None and not problems:
        problems = ["offered_rate_cps: required for a single run"]
    if problems:
        raise ConfigError(problems)
    return _impl.Simulation(cfg, log=log)


def run_scenario(cfg: ScenarioConfig):
    """Build, run, and reduce one scenario to its report row."""
    from sipsim.metrics import compute_report

    sim = build_scenario(cfg)
    sim.run()
    return compute_report(sim.log, cfg.warmup_s, cfg.window_s, cfg.offered_rate_cps)
