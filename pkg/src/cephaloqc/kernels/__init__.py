"""Hot numeric kernels with selectable backend.

Two implementations of the same kernels exist:

* ``numba_impl`` -- ``@njit``-compiled loops (default when numba imports)
* ``numpy_impl`` -- pure-numpy fallback

Set ``CEPHALOQC_NO_NUMBA=1`` in the environment to force the numpy path.
Both backends produce numerically identical results (see
``tests/test_kernels.py``); ``benchmarks/bench_kernels.py`` compares their
throughput.
"""

import os

_FORCE_NUMPY = os.environ.get("CEPHALOQC_NO_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

if _FORCE_NUMPY:
    from . import numpy_impl as _impl

    USING_NUMBA = False
else:
    try:
        from . import numba_impl as _impl

        USING_NUMBA = True
    except ImportError:  # numba missing or broken; degrade silently
        from . import numpy_impl as _impl

        USING_NUMBA = False

betainc = _impl.betainc
bilinear = _impl.bilinear


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"


__all__ = ["betainc", "bilinear", "backend_name", "USING_NUMBA"]
