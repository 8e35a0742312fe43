"""Backend selection for the weak-flux kernel.

The compiled extension is used when it imports; ``SPDELAB_PURE_PYTHON=1``
forces the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
flux_assemble = _kernels_py.flux_assemble

if os.environ.get("SPDELAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on build
        _compiled = None
    if _compiled is not None:
        BACKEND = "cython"
        flux_assemble = _compiled.flux_assemble

__all__ = ["BACKEND", "flux_assemble"]
