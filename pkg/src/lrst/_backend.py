"""Backend selection for the compiled kernels.

Set ``LRST_NUMBA=0`` in the environment before import to force the pure
numpy code paths. If numba is not importable, numpy is used silently.
"""

import functools
import os

_requested = os.environ.get("LRST_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

try:
    import numba as _nb
except ImportError:  # pragma: no cover
    _nb = None

USE_NUMBA = _requested and _nb is not None

if _nb is not None:
    njit = functools.partial(_nb.njit, cache=True, nogil=True)
else:  # pragma: no cover

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
