"""Select the port kernel: compiled extension when built, pure Python otherwise.

Set ``SLICEISO_PURE=1`` to force the Python kernel.
"""
import os

from . import rrport as _py

PURE = os.environ.get("SLICEISO_PURE", "") not in ("", "0")

if PURE:
    RRPort = _py.RRPort
    BACKEND = "python"
else:
    try:
        from ._rrport import RRPort  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        RRPort = _py.RRPort
        BACKEND = "python"

PyRRPort = _py.RRPort
