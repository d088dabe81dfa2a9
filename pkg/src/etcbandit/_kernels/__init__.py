"""Kernel backend selection.

The column-wise elliptope ascent is the hot loop of every large solve, so
it ships as a compiled extension with a numpy reference implementation as
fallback. Set ETCBANDIT_PURE_PYTHON=1 to force the fallback.
"""

import os

from . import pyref

if os.environ.get("ETCBANDIT_PURE_PYTHON"):
    ascent_kernel = pyref.ascent
    BACKEND = "python"
else:
    try:
        from ._ascent import ascent as ascent_kernel
        BACKEND = "cython"
    except ImportError:
        ascent_kernel = pyref.ascent
        BACKEND = "python"
