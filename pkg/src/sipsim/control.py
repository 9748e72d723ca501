"""Feedback-free window-based admission control for the upstream proxy.

The controller keeps a window of active admitted transactions.  A new call
is admitted only while the open-transaction count is below
``floor(window)``.  When an admitted transaction completes, its locally
measured delay joins a ring of recent delays and exactly one growth branch
applies:

* overload detected        -> growth threshold := max(1, window/2), window := 1
* window below threshold   -> window += 1
* otherwise                -> window += 1/window

A timeout of an admitted transaction frees its slot and counts as an
overload signal (same collapse as above).  The controller never inspects
any field of a received message - its inputs are admission attempts and
locally measured delays only.

Overload detection compares the mean of recent delays against the
acceptable-delay threshold.  The default predicate is
``mean > z_th + alpha * stddev`` (population stddev); two alternative
readings are selectable per scenario:

* ``momentary_band``:   mean > z_th + alpha * most-recent delay
* ``literal_low_delay``: mean < z_th + alpha * mean (fires on low delay;
  kept only so the alternative reading can be exercised - not useful as a
  control law)
"""

from __future__ import annotations

import math
from typing import Sequence

from sipsim.kernel import impl as _impl

WindowController = _impl.WindowController

COMPARATORS = {
    "sigma_band": _impl.CMP_SIGMA_BAND,
    "momentary_band": _impl.CMP_MOMENTARY_BAND,
    "literal_low_delay": _impl.CMP_LITERAL_LOW,
}

DEFAULT_COMPARATOR = "sigma_band"


def detect_overload(history_ms: Sequence[float], z_th_ms: float, alpha: float,
                    comparator: str = DEFAULT_COMPARATOR) -> bool:
    """Evaluate the overload predicate over a window of recent delays (ms).

    An empty history is never overload.  ``sigma_band`` uses the population
    standard deviation of the history.
    """
    n = len(history_ms)
    if n == 0:
        return False
    mean = sum(history_ms) / n
    if comparator == "sigma_band":
        var = sum((x - mean) ** 2 for x in history_ms) / n
        return mean > z_th_ms + alpha * math.sqrt(var)
    if comparator == "momentary_band":
        return mean > z_th_ms + alpha * history_ms[-1]
    if comparator == "literal_low_delay":
        return mean < z_th_ms + alpha * mean
    raise ValueError(f"unknown comparator: {comparator!r}")


def make_controller(z_th_ms: float, alpha: float, history_size: int,
                    initial_window: float, initial_win_th: float,
                    comparator: str = DEFAULT_COMPARATOR) -> WindowController:
    """Construct a controller from ms-domain scenario parameters."""
    return WindowController(
        round(z_th_ms * 1000),
        alpha,
        history_size,
        initial_window,
        initial_win_th,
        comparator=COMPARATORS[comparator],
    )


__all__ = [
    "WindowController",
    "COMPARATORS",
    "DEFAULT_COMPARATOR",
    "detect_overload",
    "make_controller",
]
