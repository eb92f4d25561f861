"""Backend selection for the time-stepping kernel.

The compiled extension is used when it was built; set
``TWOLEVEL_CONSENSUS_PURE=1`` to force the NumPy fallback.
"""

import os

from . import _rk4_py

BACKEND = "python"
rk4_linear = _rk4_py.rk4_linear

if os.environ.get("TWOLEVEL_CONSENSUS_PURE", "") not in ("1", "true", "yes"):
    try:
        from ._rk4 import rk4_linear  # noqa: F811
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"

__all__ = ["BACKEND", "rk4_linear"]
