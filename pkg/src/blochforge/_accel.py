"""Numba switch.

Set ``BLOCHFORGE_NUMBA=0`` to run the pure-numpy kernels instead of the
jitted ones. ``BLOCHFORGE_THREADS`` caps the numba thread pool.
"""
import os

_FALSE = {"0", "false", "no", "off"}

USE_NUMBA = os.environ.get("BLOCHFORGE_NUMBA", "1").strip().lower() not in _FALSE

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None
    USE_NUMBA = False


if numba is not None:
    # the TBB layer is tried first by default and warns on old installs
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

prange = numba.prange if numba is not None else range


def thread_cap():
    raw = os.environ.get("BLOCHFORGE_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        return None
    return n if n > 0 else None


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or a no-op decorator without numba."""
    if numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def configure_threads():
    cap = thread_cap()
    if numba is not None and cap is not None:
        numba.set_num_threads(min(cap, numba.config.NUMBA_NUM_THREADS))
