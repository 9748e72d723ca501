"""Simulation core surface: virtual clock, event queue, lossy links.

Time is integer microseconds.  Events fire in nondecreasing time order with
ties broken by insertion sequence, so runs are fully deterministic given a
seed.  Scheduling into the past is a programming fault and raises
:class:`SimulationError`, aborting the run.
"""

from sipsim.kernel import impl as _impl

SimulationError = _impl.SimulationError
EventQueue = _impl.EventQueue
Link = _impl.Link
Simulation = _impl.Simulation


def send_over_link(link: Link, msg) -> None:
    """Send ``msg`` over ``link``: lost outright or delivered after its delay."""
    link.send(msg)


__all__ = ["SimulationError", "EventQueue", "Link", "Simulation", "send_over_link"]
