"""Workload source: seeded call arrival streams and per-call scripts.

Arrivals are a Poisson process (exponential inter-arrival times) or, in
deterministic mode, a constant-spaced train starting at t=0.  Hold times
are drawn up front, one per call in arrival order, from their own stream,
so changing loss or service behavior never shifts the draws.
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random
from typing import Iterator


@dataclass(frozen=True)
class CallScript:
    """One planned call: when it starts and how long it stays up."""

    arrival_us: int
    hold_us: int
    caller: str = "uac"
    callee: str = "uas"


def arrival_scripts(rate_cps: float, duration_s: float, arrival_rng: Random,
                    hold_rng: Random, *, deterministic: bool = False,
                    hold_mean_s: float = 10.0,
                    hold_constant: bool = False) -> Iterator[CallScript]:
    """Yield call scripts in arrival order using caller-provided streams."""
    if rate_cps <= 0:
        return
    end_us = round(duration_s * 1e6)

    def hold_us() -> int:
        if hold_constant or hold_mean_s <= 0:
            return round(hold_mean_s * 1e6)
        return round(hold_rng.expovariate(1.0 / hold_mean_s) * 1e6)

    if deterministic:
        k = 0
        while True:
            t = round(k * 1e6 / rate_cps)
            if t >= end_us:
                return
            yield CallScript(t, hold_us())
            k += 1
    else:
        t_s = 0.0
        while True:
            t_s += arrival_rng.expovariate(rate_cps)
            t = round(t_s * 1e6)
            if t >= end_us:
                return
            yield CallScript(t, hold_us())


def generate_arrivals(rate_cps: float, duration_s: float, seed: int, *,
                      deterministic: bool = False, hold_mean_s: float = 10.0,
                      hold_constant: bool = False) -> Iterator[CallScript]:
    """Self-seeding variant of :func:`arrival_scripts`.

    Streams are derived from ``seed`` with the same fixed offsets the
    simulation uses (arrivals: seed+1, hold times: seed+3), so a stream
    generated here matches what a run with that seed consumes.
    """
    return arrival_scripts(
        rate_cps,
        duration_s,
        Random(seed + 1),
        Random(seed + 3),
        deterministic=deterministic,
        hold_mean_s=hold_mean_s,
        hold_constant=hold_constant,
    )
