"""Discrete-event simulator of SIP signaling overload in a dual-proxy topology."""

from sipsim.kernel import kernel_kind

__version__ = "0.1.0"

__all__ = ["kernel_kind", "__version__"]
