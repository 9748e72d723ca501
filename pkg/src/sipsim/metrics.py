"""Run metrics: streaming event log, report rows, CSV/JSON export.

The event log is fed by the simulation kernel while it runs.  Rates are
measured over a single half-open window ``[warmup, warmup + window)`` fixed
at construction, so recording stays O(1) per event; whole-run totals are
kept separately for conservation checks.  ``queue_pct`` reports the queue
high-water mark as a percentage of the queue bound - the closest simulator
analog of a memory gauge (see README).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass


class EventLog:
    """Append-only sink of timestamped metric events.

    Timestamps must be nondecreasing (simulation order).  With
    ``trace=True`` every event is also kept as a ``(t_us, tag)`` tuple in
    ``events`` for inspection; by default only counters are maintained.
    """

    def __init__(self, warmup_s: float, window_s: float, trace: bool = False):
        if window_s <= 0:
            raise ValueError("window_s must be positive")
        self.warmup_s = warmup_s
        self.window_s = window_s
        self.wu_us = round(warmup_s * 1e6)
        self.wend_us = self.wu_us + round(window_s * 1e6)
        self.events: list[tuple[int, str]] | None = [] if trace else None
        self._last_t = 0
        # whole-run totals
        self.gen_total = 0
        self.gen_before_wend = 0
        self.success_total = 0
        self.rejected_total = 0
        self.timeout_total = 0
        self.retx_invite_total = 0
        self.retx_bye_total = 0
        self.drop_total = 0
        self.stray_total = 0
        self.shed_total = 0
        self.cpu_reject_total = 0
        # in-window counters
        self.events_w = 0
        self.success_w = 0
        self.delays_w_us: list[int] = []
        self.shed_w = 0
        self.cpu_reject_w = 0
        self.timeout_w = 0
        self.retx_invite_w = 0
        self.retx_bye_w = 0
        self.drop_w = 0
        # end-of-run gauges
        self.downstream_busy_window_us = 0
        self.downstream_queue_hw = 0
        self.q_max = 0
        self.inflight_setup = 0
        self.bye_started = 0
        self.bye_timeouts = 0

    # -- recording -----------------------------------------------------------

    def _note(self, t: int, tag: str) -> bool:
        if t < self._last_t:
            raise ValueError("event timestamps must be nondecreasing")
        self._last_t = t
        if self.events is not None:
            self.events.append((t, tag))
        if self.wu_us <= t < self.wend_us:
            self.events_w += 1
            return True
        return False

    def record(self, t: int, tag: str) -> None:
        """Generic event; counts toward the empty-window flag only."""
        self._note(t, tag)

    def call_generated(self, t: int) -> None:
        self._note(t, "call_generated")
        self.gen_total += 1
        if t < self.wend_us:
            self.gen_before_wend += 1

    def setup_complete(self, t: int, delay_us: int) -> None:
        self.success_total += 1
        if self._note(t, "setup_complete"):
            self.success_w += 1
            self.delays_w_us.append(delay_us)

    def call_rejected(self, t: int) -> None:
        self._note(t, "call_rejected")
        self.rejected_total += 1

    def call_timeout(self, t: int) -> None:
        self.timeout_total += 1
        if self._note(t, "call_timeout"):
            self.timeout_w += 1

    def retx(self, t: int, is_invite: bool) -> None:
        if is_invite:
            self.retx_invite_total += 1
            if self._note(t, "retx_invite"):
                self.retx_invite_w += 1
        else:
            self.retx_bye_total += 1
            if self._note(t, "retx_bye"):
                self.retx_bye_w += 1

    def window_shed(self, t: int) -> None:
        self.shed_total += 1
        if self._note(t, "window_shed"):
            self.shed_w += 1

    def cpu_reject(self, t: int) -> None:
        self.cpu_reject_total += 1
        if self._note(t, "cpu_reject"):
            self.cpu_reject_w += 1

    def drop(self, t: int) -> None:
        self.drop_total += 1
        if self._note(t, "drop"):
            self.drop_w += 1

    def stray(self, t: int) -> None:
        self._note(t, "stray")
        self.stray_total += 1

    # -- end-of-run gauges -----------------------------------------------------

    def set_downstream_gauges(self, busy_window_us: int, queue_hw: int, q_max: int) -> None:
        self.downstream_busy_window_us = busy_window_us
        self.downstream_queue_hw = queue_hw
        self.q_max = q_max

    def set_end_state(self, inflight_setup: int, bye_started: int, bye_timeouts: int) -> None:
        self.inflight_setup = inflight_setup
        self.bye_started = bye_started
        self.bye_timeouts = bye_timeouts


@dataclass
class MetricsReport:
    """One sweep-point row; fields mirror the CSV columns exactly."""

    offered_rate_cps: float
    throughput_cps: float
    setup_delay_mean_ms: float
    setup_delay_p95_ms: float
    invite_retx_rps: float
    bye_retx_rps: float
    cpu_utilization_pct: float
    queue_occupancy_pct: float
    rejected_window: int
    rejected_cpu: int
    timeouts: int
    empty: bool = False  # no events fell inside the measurement window

    def __post_init__(self):
        for pct in (self.cpu_utilization_pct, self.queue_occupancy_pct):
            if not 0.0 <= pct <= 100.0:
                raise ValueError("percentages must lie in [0, 100]")


def percentile_nearest_rank(sorted_values, q: float):
    """Nearest-rank percentile of an ascending-sorted nonempty sequence."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("empty sequence")
    rank = max(1, math.ceil(q * n))
    return sorted_values[rank - 1]


def compute_report(log: EventLog, warmup_s: float, window_s: float,
                   offered_rate_cps: float) -> MetricsReport:
    """Reduce a run's event log to one report row.

    ``warmup_s``/``window_s`` must match what the log was recording against;
    rates are events-per-second over the window, delays are per-success.
    """
    if warmup_s != log.warmup_s or window_s != log.window_s:
        raise ValueError(
            "log was recorded for warmup=%gs window=%gs" % (log.warmup_s, log.window_s)
        )
    if log.events_w == 0:
        return MetricsReport(offered_rate_cps, 0.0, 0.0, 0.0, 0.0, 0.0,
                             0.0, 0.0, 0, 0, 0, empty=True)
    if log.success_w > log.gen_before_wend:
        raise ValueError("more setups completed than calls generated")
    delays = sorted(log.delays_w_us)
    if delays:
        mean_ms = (sum(delays) / len(delays)) / 1000.0
        p95_ms = percentile_nearest_rank(delays, 0.95) / 1000.0
    else:
        mean_ms = 0.0
        p95_ms = 0.0
    window_us = log.wend_us - log.wu_us
    cpu_pct = 100.0 * log.downstream_busy_window_us / window_us
    if log.q_max > 0:
        queue_pct = 100.0 * log.downstream_queue_hw / log.q_max
    else:
        queue_pct = 0.0
    return MetricsReport(
        offered_rate_cps=offered_rate_cps,
        throughput_cps=log.success_w / window_s,
        setup_delay_mean_ms=mean_ms,
        setup_delay_p95_ms=p95_ms,
        invite_retx_rps=log.retx_invite_w / window_s,
        bye_retx_rps=log.retx_bye_w / window_s,
        cpu_utilization_pct=min(100.0, cpu_pct),
        queue_occupancy_pct=min(100.0, queue_pct),
        rejected_window=log.shed_w,
        rejected_cpu=log.cpu_reject_w,
        timeouts=log.timeout_w,
    )


CSV_COLUMNS = (
    "offered_cps",
    "throughput_cps",
    "setup_delay_ms",
    "setup_delay_p95_ms",
    "invite_retx_rps",
    "bye_retx_rps",
    "cpu_pct",
    "queue_pct",
    "rejected_window",
    "rejected_cpu",
    "timeouts",
)


def _row_values(r: MetricsReport) -> list:
    return [
        float(f"{r.offered_rate_cps:g}"),
        round(r.throughput_cps, 3),
        round(r.setup_delay_mean_ms, 3),
        round(r.setup_delay_p95_ms, 3),
        round(r.invite_retx_rps, 3),
        round(r.bye_retx_rps, 3),
        round(r.cpu_utilization_pct, 2),
        round(r.queue_occupancy_pct, 2),
        r.rejected_window,
        r.rejected_cpu,
        r.timeouts,
    ]


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    return f"{v:g}"


def export_csv(reports) -> str:
    """Stable CSV: pinned header, one row per sweep point, '\\n' line ends."""
    lines = [",".join(CSV_COLUMNS)]
    for r in reports:
        lines.append(",".join(_fmt(v) for v in _row_values(r)))
    return "\n".join(lines) + "\n"


def export_json(reports) -> str:
    """JSON array of objects keyed identically to the CSV columns."""
    rows = [dict(zip(CSV_COLUMNS, _row_values(r))) for r in reports]
    return json.dumps(rows, indent=2) + "\n"


def export(reports, fmt: str) -> str:
    if fmt == "csv":
        return export_csv(reports)
    if fmt == "json":
        return export_json(reports)
    raise ValueError(f"unknown export format: {fmt!r}")
