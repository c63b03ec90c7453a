"""Kernel backend selection.

The compiled extension is used when it imports; ``DDFORM_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
ball_max = _kernels_py.ball_max
holder_quotient_max = _kernels_py.holder_quotient_max

if not os.environ.get("DDFORM_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        ball_max = _compiled.ball_max
        holder_quotient_max = _compiled.holder_quotient_max
        BACKEND = "cython"

__all__ = ["BACKEND", "ball_max", "holder_quotient_max"]
