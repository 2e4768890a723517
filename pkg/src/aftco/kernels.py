"""Backend selection for the cut-set kernels.

The compiled extension is used when it was built and
``AFTCO_PURE_PYTHON`` is not set; otherwise the Python fallback.  The
compiled kernel handles at most 64 leaves, wider families always go to
the fallback.
"""
import os

from . import _cutsets_py

try:
    from . import _cutsets as _compiled
except ImportError:  # extension not built
    _compiled = None

MAX_COMPILED_LEAVES = 64

if _compiled is not None and not os.environ.get("AFTCO_PURE_PYTHON"):
    impl = _compiled
    BACKEND = "cython"
else:
    impl = _cutsets_py
    BACKEND = "python"


def available():
    out = {"python": _cutsets_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def for_width(n_leaves):
    return impl if n_leaves <= MAX_COMPILED_LEAVES else _cutsets_py
