"""Kernel dispatch.

The compiled extension ``subseg._kernels`` is used when it imports;
otherwise the pure-Python implementations in ``subseg._pykernels`` are
selected.  Setting ``SUBSEG_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels

if os.environ.get("SUBSEG_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

edit_alignment = _impl.edit_alignment
ctc_forward = _impl.ctc_forward


def available_backends():
    """Name -> module for every kernel implementation that imports."""
    out = {"python": _pykernels}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out
