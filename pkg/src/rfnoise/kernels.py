"""Kernel backend selection.

The Cython extension ``rfnoise._kernels`` is used when it was built;
otherwise the numpy implementations in ``rfnoise._kernels_py`` are used.
Set ``RFNOISE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("RFNOISE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

xcorr_lags = _impl.xcorr_lags
silu_forward = _impl.silu_forward
silu_backward = _impl.silu_backward
adam_update = _impl.adam_update

__all__ = ["BACKEND", "adam_update", "xcorr_lags", "silu_forward", "silu_backward"]
