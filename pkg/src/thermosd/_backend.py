"""Select the loop kernel at import time.

The compiled extension is used when it has been built; setting
``THERMOSD_PURE_PYTHON=1`` forces the pure-Python kernel.
"""

import os

if os.environ.get("THERMOSD_PURE_PYTHON", "") not in ("", "0"):
    from ._loop_py import run_loop

    BACKEND = "python"
else:
    try:
        from ._loop import run_loop

        BACKEND = "cython"
    except ImportError:  # extension not built
        from ._loop_py import run_loop

        BACKEND = "python"

__all__ = ["BACKEND", "run_loop"]
