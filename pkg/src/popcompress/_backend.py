"""Select the Lloyd kernel: compiled extension if importable, else NumPy.

Set ``POPCOMPRESS_PURE_PYTHON=1`` to force the NumPy path.
"""

import os

from . import _lloyd_py

BACKEND = "python"
kernel = _lloyd_py

if os.environ.get("POPCOMPRESS_PURE_PYTHON") != "1":
    try:
        from . import _lloyd as kernel  # noqa: F811
    except ImportError:
        pass
    else:
        BACKEND = "cython"

run_lloyd = kernel.run_lloyd
assign = kernel.assign
