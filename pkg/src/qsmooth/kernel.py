"""Backend selection for the ensemble kernel.

The compiled extension is used when importable; otherwise the numpy
implementation.  Set ``QSMOOTH_BACKEND=python`` to force the fallback.
"""

import os

from . import _kernel_py

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernel_py.propagate_chunk}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled.propagate_chunk


def default_backend():
    forced = os.environ.get("QSMOOTH_BACKEND", "").strip().lower()
    if forced:
        if forced not in BACKENDS:
            raise RuntimeError(f"QSMOOTH_BACKEND={forced!r} unavailable; have {sorted(BACKENDS)}")
        return forced
    return "compiled" if "compiled" in BACKENDS else "python"


BACKEND = default_backend()


def get_kernel(name=None):
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise RuntimeError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
