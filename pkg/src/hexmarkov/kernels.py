"""Hot-kernel backend, chosen once at import.

The compiled extension is used when it was built; otherwise (or when the
environment variable ``HEXMARKOV_PURE`` is set to a non-empty value) the
numpy/pure-Python twins in ``_pykernels`` are used.  Both backends return
bit-identical results.
"""
import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)

_impl = _pykernels
BACKEND = "python"
if not os.environ.get("HEXMARKOV_PURE"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        logger.debug("compiled kernels unavailable, using pure-Python fallback")

hex_round = _impl.hex_round
resample = _impl.resample
run_transitions = _impl.run_transitions
brandes = _impl.brandes
bfs_path_totals = _impl.bfs_path_totals


def backends():
    """Map of available backend name -> kernel module."""
    found = {"python": _pykernels}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:  # pragma: no cover
        pass
    return found
