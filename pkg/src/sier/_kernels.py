"""Selects the coordinate-descent kernel at import time.

The compiled extension is preferred; the pure-Python twin is the fallback.
Setting ``SIER_PURE_PYTHON=1`` forces the fallback (used by the benchmark
and by tests that compare the two).
"""

import os

if os.environ.get("SIER_PURE_PYTHON", "") == "1":
    from ._cd_fallback import alternate_solve

    COMPILED = False
else:
    try:
        from ._cd import alternate_solve

        COMPILED = True
    except ImportError:
        from ._cd_fallback import alternate_solve

        COMPILED = False

__all__ = ["alternate_solve", "COMPILED"]
