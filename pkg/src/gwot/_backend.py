"""Kernel backend selection.

The compiled extension is preferred when it imports cleanly; the pure-numpy
fallback is used otherwise, or when the environment variable
``GWOT_PURE_PYTHON`` is set to a non-empty value.
"""

import os

from . import _kernels_py

if os.environ.get("GWOT_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = _kernels_py

COMPILED = bool(getattr(_impl, "COMPILED", False))

dual_eval = _impl.dual_eval
network_simplex_core = _impl.network_simplex_core
assignment_min_core = _impl.assignment_min_core
