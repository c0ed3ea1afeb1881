"""Kernel selection: the compiled sweep when built, else the pure-Python one.

Set ``WSBMREC_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _sweep_py

try:
    if os.environ.get("WSBMREC_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _sweep as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _sweep_py.estep_sweep}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled.estep_sweep

DEFAULT_BACKEND = "compiled" if _compiled is not None else "python"


def get_sweep(backend=None):
    name = backend or DEFAULT_BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
