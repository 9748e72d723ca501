"""Selects the simulation kernel implementation at import time.

The reference kernel is the pure-Python module ``sipsim._kernel``.  When the
package was built with Cython, the same source is also available as the
compiled extension ``sipsim._kernel_c``; it is preferred automatically.
Set ``SIPSIM_PURE=1`` in the environment to force the pure kernel (used by
the benchmark in ``benchmarks/compare_kernels.py`` and handy when checking
that both flavors agree).
"""

import os

_pure_forced = os.environ.get("SIPSIM_PURE", "") not in ("", "0")

impl = None
if not _pure_forced:
    try:
        from sipsim import _kernel_c as impl
    except ImportError:
        impl = None
    else:
        # A stray _kernel_c.py source copy is not a compiled kernel.
        if not str(getattr(impl, "__file__", "")).endswith((".so", ".pyd")):
            impl = None

if impl is None:
    from sipsim import _kernel as impl  # noqa: F811


def kernel_kind() -> str:
    """'compiled' when the Cython extension is active, else 'pure'."""
    if impl.__name__.endswith("_kernel_c"):
        return "compiled"
    return "pure"
