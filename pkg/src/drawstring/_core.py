"""Pick the compiled kernel module when it is importable, else the numpy fallback.

Set DRAWSTRING_PURE=1 to force the fallback (used by the benchmark and tests).
"""
import os

if os.environ.get("DRAWSTRING_PURE", "") not in ("", "0"):
    from . import _kernels_py as kernels
    COMPILED = False
else:
    try:
        from . import _kernels as kernels
        COMPILED = True
    except ImportError:  # pragma: no cover - depends on the build
        from . import _kernels_py as kernels
        COMPILED = False

hermite5 = kernels.hermite5
ewald_green = kernels.ewald_green
