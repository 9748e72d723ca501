"""Proxy surface: bounded-queue fixed-rate server model and the CPU sensor.

A proxy's effective call capacity is ``1 / (service_time * 7)`` because a
clean call costs seven service slots per proxy.  Rejecting a call is not
free: the 503 occupies one slot, so shedding under overload still loads
the server.
"""

from sipsim.kernel import impl as _impl

ProxyModel = _impl.Proxy
CpuSensor = _impl.CpuSensor
MESSAGES_PER_CALL = _impl.MESSAGES_PER_CALL


def service_time_us(capacity_cps: float) -> int:
    """Per-message service time realizing ``capacity_cps`` at 7 slots per call."""
    return max(1, round(1e6 / (capacity_cps * MESSAGES_PER_CALL)))


def effective_capacity_cps(capacity_cps: float) -> float:
    """Capacity after rounding service time to whole microseconds."""
    return 1e6 / (service_time_us(capacity_cps) * MESSAGES_PER_CALL)


def cpu_admission_check(sensor: CpuSensor, now_us: int) -> bool:
    """True (admit) unless trailing-window utilization exceeds the threshold.

    Applies only to initial INVITEs at the downstream proxy; retransmissions
    matched to a server transaction replay the stored response instead, and
    in-dialog messages bypass admission entirely.
    """
    return sensor.utilization(now_us) <= sensor.threshold


__all__ = [
    "ProxyModel",
    "CpuSensor",
    "MESSAGES_PER_CALL",
    "service_time_us",
    "effective_capacity_cps",
    "cpu_admission_check",
]
