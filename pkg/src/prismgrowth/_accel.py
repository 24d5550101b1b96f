"""Optional numba acceleration.

Set ``PRISMGROWTH_DISABLE_NUMBA=1`` to force the pure-numpy kernels; the
flag is read once at import time.
"""
import os

_DISABLED = os.environ.get("PRISMGROWTH_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

try:
    if _DISABLED:
        raise ImportError
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAS_NUMBA:
        import numba

        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn
