"""Hot-kernel selection: compiled extension when available, numpy fallback
otherwise. Set MODEWATCH_PURE_PYTHON=1 to force the fallback."""

import os

if os.environ.get("MODEWATCH_PURE_PYTHON"):
    from . import _pure as _impl
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _pure as _impl

NATIVE = _impl.NATIVE
ekf_filter = _impl.ekf_filter
longest_repeat_run = _impl.longest_repeat_run

__all__ = ["NATIVE", "ekf_filter", "longest_repeat_run"]
