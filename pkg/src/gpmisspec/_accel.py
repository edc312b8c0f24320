"""Backend selection for the hot numeric kernels.

The Bessel function and the covariance-matrix assembly loops are compiled
with numba when it is importable. Setting ``GPMISSPEC_DISABLE_NUMBA=1`` in
the environment forces the pure-numpy implementations instead; both paths
compute the same quantities and are tested against each other.
"""

import os

ENV_FLAG = "GPMISSPEC_DISABLE_NUMBA"

_disabled = os.environ.get(ENV_FLAG, "").strip().lower() not in ("", "0", "false", "no")

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _disabled


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or a no-op decorator without numba."""
    if not HAS_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def backend():
    return "numba" if USE_NUMBA else "numpy"
