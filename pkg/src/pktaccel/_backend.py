"""Pick the compiled kernels when importable, else the pure-Python twins.

Set ``PKTACCEL_PURE=1`` to force the fallback (used by the backend benchmark
and the fallback test runs).
"""

import os

speedups = None
if not os.environ.get("PKTACCEL_PURE"):
    try:
        from . import _speedups as speedups
    except ImportError:  # extension not built
        speedups = None

COMPILED = speedups is not None


def name() -> str:
    return "compiled" if COMPILED else "python"
