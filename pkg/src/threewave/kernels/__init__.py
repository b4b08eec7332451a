"""Hot-kernel dispatch: compiled extension when available, numpy otherwise.

Set THREEWAVE_NO_EXT=1 to force the numpy path (used by the benchmark to
compare both implementations).
"""

import os

from . import _ref

if os.environ.get("THREEWAVE_NO_EXT"):
    _impl = _ref
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _ref

COMPILED = _impl.COMPILED
nonlinear_rk4 = _impl.nonlinear_rk4

__all__ = ["COMPILED", "nonlinear_rk4"]
