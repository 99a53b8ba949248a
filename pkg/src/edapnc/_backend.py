"""Backend selection for the compiled kernels.

Set ``EDAPNC_DISABLE_NUMBA=1`` to force the pure-numpy code paths. The flag
is read once at import time; kernels also accept an explicit ``backend``
argument so both paths can be exercised in the same process.
"""

import os

_FLAG = os.environ.get("EDAPNC_DISABLE_NUMBA", "").strip().lower()

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in {"1", "true", "yes", "on"}

BACKENDS = ("numba", "numpy")


def default_backend():
    return "numba" if USE_NUMBA else "numpy"


def resolve(backend=None):
    """Map ``None`` to the default backend and validate explicit choices."""
    if backend is None:
        return default_backend()
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}, expected one of {BACKENDS}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


if HAVE_NUMBA:
    from numba import njit
else:  # pragma: no cover

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
