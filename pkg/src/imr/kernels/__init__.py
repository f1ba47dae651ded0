"""Backend selection for the hot loops.

The numba versions are used when numba imports cleanly and the environment
variable ``IMR_DISABLE_NUMBA`` is unset or ``0``.  Setting it to ``1`` forces
the pure-numpy versions, which return identical results.
"""

import os

from . import _numpy

BACKEND = "numpy"

if os.environ.get("IMR_DISABLE_NUMBA", "0") in ("", "0"):
    try:
        from . import _numba as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba missing
        _impl = _numpy
else:
    _impl = _numpy

group_sums = _impl.group_sums
group_moments = _impl.group_moments
sample_children = _impl.sample_children

__all__ = [
    "BACKEND",
    "group_sums",
    "group_moments",
    "sample_children",
]
