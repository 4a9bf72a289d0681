"""Backend selection for the hot LRU kernels.

The compiled extension is used when importable; set ``MMUSIM_PURE_PYTHON=1``
to force the pure-Python fallback (both give identical results).
"""

import os

if os.environ.get("MMUSIM_PURE_PYTHON", "") not in ("", "0"):
    from ._lru_py import CacheStack, LruSets

    BACKEND = "python"
else:
    try:
        from ._lru import CacheStack, LruSets

        BACKEND = "cython"
    except ImportError:  # extension not built
        from ._lru_py import CacheStack, LruSets

        BACKEND = "python"

__all__ = ["BACKEND", "CacheStack", "LruSets"]
