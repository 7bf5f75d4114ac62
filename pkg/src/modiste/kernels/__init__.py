"""Hot pixel kernels with a compiled core and a numpy fallback.

The compiled extension is optional: if it failed to build (or the
``MODISTE_KERNEL=numpy`` override is set) the numpy implementation is used
instead. Both expose the same ``dilate_chebyshev`` contract and are checked
against each other in the test suite; ``benchmarks/bench_kernels.py``
compares their throughput.
"""

import os

from modiste.kernels import _numpy

if os.environ.get("MODISTE_KERNEL") == "numpy":
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from modiste.kernels import _native as _impl

        BACKEND = "native"
    except ImportError:
        _impl = _numpy
        BACKEND = "numpy"


def dilate_chebyshev(bits, radius: int):
    """Boolean sliding-window maximum, square window side 2*radius+1, zero padded."""
    return _impl.dilate_chebyshev(bits, radius)


def backend_name() -> str:
    """Which kernel implementation was selected at import time."""
    return BACKEND
