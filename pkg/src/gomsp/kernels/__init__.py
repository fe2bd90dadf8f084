"""Hot-kernel dispatch: compiled extension when available, numpy otherwise.

The only kernel is `solve_dispatch_objective`, the projected-gradient solver
behind the per-slot benchmark ladder and the dual-gradient baseline's argmin
(the two call sites that dominate experiment runtime). Set
GOMSP_PURE_PYTHON=1 to force the numpy fallback regardless of the build.
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("GOMSP_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _fallback

BACKEND = _impl.BACKEND_NAME
STATUS_CONVERGED = _impl.STATUS_CONVERGED
STATUS_STAGNATED = _impl.STATUS_STAGNATED
STATUS_ITER_CAP = _impl.STATUS_ITER_CAP

solve_dispatch_objective = _impl.solve_dispatch_objective

__all__ = [
    "BACKEND",
    "STATUS_CONVERGED",
    "STATUS_STAGNATED",
    "STATUS_ITER_CAP",
    "solve_dispatch_objective",
]
