"""Hot numerical kernels with a compiled core and a pure-Python fallback.

The compiled extension is preferred when importable; set
``COUPLEDREC_KERNELS=fallback`` before import to force the pure-Python
implementation (``=native`` to require the extension).  Both backends
implement the same functions with bit-identical results:

``cis_matrix(codes, tables, threads=1)``
    All-pairs object similarity from per-attribute lookup tables.

``sgd_epoch(...)``
    One epoch of per-rating gradient updates for the (graph-augmented)
    factor model.
"""

from __future__ import annotations

import os

from . import _fallback

_choice = os.environ.get("COUPLEDREC_KERNELS", "").strip().lower()

if _choice == "fallback":
    _impl = _fallback
elif _choice == "native":
    from . import _native as _impl  # raises if the extension was not built
else:
    try:
        from . import _native as _impl
    except ImportError:
        _impl = _fallback

BACKEND: str = _impl.NAME
cis_matrix = _impl.cis_matrix
sgd_epoch = _impl.sgd_epoch

__all__ = ["BACKEND", "cis_matrix", "sgd_epoch", "get_backends"]


def get_backends() -> dict[str, object]:
    """Importable backends by name (used by the comparison benchmark)."""
    found = {"fallback": _fallback}
    try:
        from . import _native
    except ImportError:
        pass
    else:
        found["native"] = _native
    return found
