"""Kernel backend selection.

Imports the compiled extension when available, otherwise the pure-Python
fallback.  Set PRIVHVAC_PURE_PY=1 to force the fallback (used by the
benchmark and the backend-equivalence tests).
"""

from __future__ import annotations

import os

_force_pure = os.environ.get("PRIVHVAC_PURE_PY", "").strip().lower() in ("1", "true", "yes")

if _force_pure:
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
SIMPLEX_OPTIMAL = _impl.SIMPLEX_OPTIMAL
SIMPLEX_UNBOUNDED = _impl.SIMPLEX_UNBOUNDED
SIMPLEX_ITER_LIMIT = _impl.SIMPLEX_ITER_LIMIT
simplex_iterate = _impl.simplex_iterate
zone_fold = _impl.zone_fold
