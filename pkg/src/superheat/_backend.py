"""Pick the compiled kernels when available.

Set ``SUPERHEAT_PURE=1`` to force the numpy fallback.
"""
import os

from . import _pure

if os.environ.get("SUPERHEAT_PURE"):
    kernels = _pure
    NAME = "python"
else:
    try:
        from . import _core as kernels
        NAME = "cython"
    except ImportError:  # extension not built
        kernels = _pure
        NAME = "python"

chord_sums = kernels.chord_sums
correlate_rows = kernels.correlate_rows
